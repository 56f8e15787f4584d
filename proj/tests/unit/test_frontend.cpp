#include <doctest.h>

#include <filesystem>

#include "minicudak/diagnostics.hpp"
#include "minicudak/lexer.hpp"
#include "minicudak/parser.hpp"
#include "minicudak/program.hpp"

#include "../test_util.hpp"

using namespace mck;

namespace {

std::vector<Tok> kinds(const std::string& src) {
    std::vector<Tok> out;
    for (const Token& t : tokenize(src, "x.cu")) out.push_back(t.kind);
    return out;
}

}  // namespace

TEST_CASE("launch brackets lex as single tokens after an identifier") {
    auto ks = kinds("sum<<<2, 9>>>(a, b);");
    std::vector<Tok> want = {Tok::Ident, Tok::LaunchOpen, Tok::IntLit, Tok::Comma, Tok::IntLit,
                             Tok::LaunchClose, Tok::LParen, Tok::Ident, Tok::Comma, Tok::Ident,
                             Tok::RParen, Tok::Semi, Tok::End};
    CHECK(ks == want);
}

TEST_CASE("empty input lexes to the end marker only") {
    CHECK(kinds("") == std::vector<Tok>{Tok::End});
}

TEST_CASE("angle-bracket runs disambiguate by context") {
    // hand-enumerated table of </> runs in launch vs expression position
    struct Row {
        const char* src;
        std::vector<Tok> want;
    };
    const Tok I = Tok::Ident, N = Tok::IntLit, E = Tok::End;
    std::vector<Row> table = {
        {"a >> > b", {I, Tok::Shr, Tok::Gt, I, E}},
        {"a > >> b", {I, Tok::Gt, Tok::Shr, I, E}},
        {"a >>> b", {I, Tok::Shr, Tok::Gt, I, E}},  // no launch open: plain shift + greater
        {"a << < b", {I, Tok::Shl, Tok::Lt, I, E}},
        {"a < << b", {I, Tok::Lt, Tok::Shl, I, E}},
        {"1 <<< 2", {N, Tok::Shl, Tok::Lt, N, E}},          // not after an identifier
        {"(a) <<< 2", {Tok::LParen, I, Tok::RParen, Tok::Shl, Tok::Lt, N, E}},
        {"k<<<a >> b, c>>>(d)",
         {I, Tok::LaunchOpen, I, Tok::Shr, I, Tok::Comma, I, Tok::LaunchClose, Tok::LParen, I,
          Tok::RParen, E}},
        {"k<<<1, 2>>>() >> 3",
         {I, Tok::LaunchOpen, N, Tok::Comma, N, Tok::LaunchClose, Tok::LParen, Tok::RParen,
          Tok::Shr, N, E}},
        {"a <<= 2", {I, Tok::ShlAssign, N, E}},
        {"a >>= 2", {I, Tok::ShrAssign, N, E}},
    };
    for (const Row& row : table) {
        CAPTURE(row.src);
        CHECK(kinds(row.src) == row.want);
    }
}

TEST_CASE("object-like macros expand at the use site") {
    auto toks = tokenize("#define N 18\n#define M (N/2)\nint x = M;", "x.cu");
    REQUIRE(toks.size() == 11);  // int x = ( 18 / 2 ) ; EOF
    CHECK(toks[3].kind == Tok::LParen);
    CHECK(toks[4].ival == 18);
    CHECK(toks[4].loc.line == 3);  // diagnostics point at the use
}

TEST_CASE("function-like macros are rejected") {
    CHECK_THROWS_AS(tokenize("#define F(x) x\n", "x.cu"), LexError);
}

TEST_CASE("lexical errors carry a location") {
    try {
        tokenize("int x = 1;\nchar c = 'a", "x.cu");
        FAIL("expected LexError");
    } catch (const LexError& e) {
        CHECK(e.loc.line == 2);
        CHECK(e.message.find("unterminated") != std::string::npos);
    }
    CHECK_THROWS_AS(tokenize("int $;", "x.cu"), LexError);
    CHECK_THROWS_AS(tokenize("/* no end", "x.cu"), LexError);
}

TEST_CASE("figure program parses into two functions with the right spaces") {
    auto tu = parseSource(mcktest::slurp(mcktest::corpusPath("sum.cu")), "sum.cu");
    REQUIRE(tu->functions.size() == 2);
    CHECK(tu->functions[0].name == "sum");
    CHECK(tu->functions[0].space == ExecSpace::Kernel);
    CHECK(tu->functions[1].name == "main");
    CHECK(tu->functions[1].space == ExecSpace::HostOnly);
}

TEST_CASE("minimal program parses: one function, no kernels") {
    auto tu = parseSource("int main(void){return 0;}", "x.cu");
    REQUIRE(tu->functions.size() == 1);
    CHECK(tu->functions[0].params.empty());
    for (const auto& f : tu->functions) CHECK(f.space != ExecSpace::Kernel);
}

TEST_CASE("launch expressions capture the full configuration") {
    auto tu = parseSource(
        "__global__ void sum(int* a, int* b) {}\n"
        "int main(void) { int *dev_out; sum<<<1, 2, 2 * sizeof(int)>>>(dev_out, dev_out); "
        "return 0; }",
        "x.cu");
    const Stmt* body = tu->functions[1].body;
    const Expr* launch = nullptr;
    for (const Stmt* s : body->body)
        if (s->kind == StmtKind::ExprSt && s->expr->kind == ExprKind::Launch) launch = s->expr;
    REQUIRE(launch != nullptr);
    CHECK(launch->cfgGrid->kind == ExprKind::IntLit);
    CHECK(launch->cfgGrid->ival == 1);
    CHECK(launch->cfgBlock->ival == 2);
    CHECK(launch->cfgShmem != nullptr);
    CHECK(launch->cfgStream == nullptr);
    CHECK(launch->args.size() == 2);
}

TEST_CASE("pretty-print then reparse is structurally stable on the corpus") {
    namespace fs = std::filesystem;
    int checked = 0;
    for (const auto& entry : fs::directory_iterator(MCK_CORPUS_DIR)) {
        if (entry.path().extension() != ".cu") continue;
        CAPTURE(entry.path().string());
        auto tu = parseSource(mcktest::slurp(entry.path().string()), "x.cu");
        auto printed = printTranslationUnit(*tu);
        auto tu2 = parseSource(printed, "x.cu");
        CHECK(structurallyEqual(*tu, *tu2));
        ++checked;
    }
    CHECK(checked >= 3);
}

TEST_CASE("every node reachable from a parsed unit has a source location") {
    auto tu = parseSource(mcktest::slurp(mcktest::corpusPath("sum.cu")), "sum.cu");
    int nodes = 0;
    forEachLoc(*tu, [&](SourceLoc loc) {
        ++nodes;
        CHECK(loc.line > 0);
        CHECK(loc.col > 0);
    });
    CHECK(nodes > 50);
}

TEST_CASE("parse errors name the expectation and the offending token") {
    try {
        parseSource("int main(void) { return 0 }", "x.cu");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.expected == "';'");
        CHECK(e.loc.line == 1);
    }
    CHECK_THROWS_AS(parseSource("int f(int a[2][2]) { return 0; }", "x.cu"), ParseError);
    CHECK_THROWS_AS(parseSource("__shared__ int x;", "x.cu"), ParseError);
}

TEST_CASE("lowering registers the dynamic shared symbol of a kernel") {
    auto prog = mcktest::compile(mcktest::slurp(mcktest::corpusPath("sum.cu")), "sum.cu");
    CHECK(prog->tu->functions[0].dynSharedName == "shared");
    CHECK(prog->tu->functions[0].dynSharedElem == 4);
}

TEST_CASE("host code cannot call __syncthreads") {
    CHECK_THROWS_AS(mcktest::compile("int main(void){ __syncthreads(); return 0; }"),
                    SemanticError);
}

TEST_CASE("kernels must return void") {
    CHECK_THROWS_AS(
        mcktest::compile("__global__ int f(void) { return 1; }\nint main(void){return 0;}"),
        SemanticError);
}

TEST_CASE("semantic rejections") {
    // unresolved identifier
    CHECK_THROWS_AS(mcktest::compile("int main(void){ return nope; }"), SemanticError);
    // kernel called like a plain function
    CHECK_THROWS_AS(mcktest::compile("__global__ void k(void){}\n"
                                     "int main(void){ k(); return 0; }"),
                    SemanticError);
    // launch of a host function
    CHECK_THROWS_AS(mcktest::compile("void f(void){}\n"
                                     "int main(void){ f<<<1,1>>>(); return 0; }"),
                    SemanticError);
    // launches from device code
    CHECK_THROWS_AS(mcktest::compile("__global__ void k(void){}\n"
                                     "__global__ void j(void){ k<<<1,1>>>(); }\n"
                                     "int main(void){ return 0; }"),
                    SemanticError);
    // string literal outside printf
    CHECK_THROWS_AS(mcktest::compile("int main(void){ char* s = \"x\"; return 0; }"),
                    SemanticError);
    // device function calling a host function
    CHECK_THROWS_AS(mcktest::compile("void h(void){}\n"
                                     "__global__ void k(void){ h(); }\n"
                                     "int main(void){ return 0; }"),
                    SemanticError);
    // extern __shared__ outside a kernel
    CHECK_THROWS_AS(mcktest::compile("__device__ void d(void){ extern __shared__ int s[]; }\n"
                                     "int main(void){ return 0; }"),
                    SemanticError);
    // two mains
    CHECK_THROWS_AS(mcktest::compile("int main(void){return 0;}\nint main(void){return 1;}"),
                    SemanticError);
    // no main
    CHECK_THROWS_AS(mcktest::compile("void f(void){}"), SemanticError);
    // unknown CUDA API name
    CHECK_THROWS_AS(mcktest::compile("int main(void){ cudaBogusCall(); return 0; }"),
                    SemanticError);
    // builtins outside device code
    CHECK_THROWS_AS(mcktest::compile("int main(void){ return threadIdx.x; }"), SemanticError);
}

TEST_CASE("attribute conflicts are rejected at parse time") {
    CHECK_THROWS_AS(parseSource("__global__ __device__ void k(void){}", "x.cu"), ParseError);
    CHECK_THROWS_AS(parseSource("__global__ __global__ void k(void){}", "x.cu"), ParseError);
}

TEST_CASE("__noinline__ and __forceinline__ parse and carry no semantics") {
    auto prog = mcktest::compile(
        "__device__ __noinline__ int f(int x) { return x + 1; }\n"
        "__global__ void k(int* out) { out[0] = f(1); }\n"
        "int main(void){ return 0; }");
    CHECK(prog->tu->functions[0].noinline);
}

TEST_CASE("type sizes are positive and match the data model") {
    CHECK(CType{BaseType::Char, 0, -1}.bitSizeof() == 8);
    CHECK(CType{BaseType::Int, 0, -1}.bitSizeof() == 32);
    CHECK(CType{BaseType::UInt, 0, -1}.bitSizeof() == 32);
    CHECK(CType{BaseType::Long, 0, -1}.bitSizeof() == 64);
    CHECK(CType{BaseType::Float, 0, -1}.bitSizeof() == 32);
    CHECK(CType{BaseType::Double, 0, -1}.bitSizeof() == 64);
    CHECK(CType{BaseType::Int, 1, -1}.bitSizeof() == 64);  // pointers
    CHECK(CType{BaseType::Int, 0, 18}.byteSize() == 72);   // int[18]
    for (BaseType b : {BaseType::Char, BaseType::Int, BaseType::UInt, BaseType::Long,
                       BaseType::Float, BaseType::Double})
        CHECK(CType{b, 0, -1}.bitSizeof() > 0);
}
