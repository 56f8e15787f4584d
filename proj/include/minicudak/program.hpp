#pragma once

#include <memory>
#include <string>
#include <vector>

#include "minicudak/ast.hpp"

namespace mck {

// CUDA Runtime API subset implemented by the interpreter. Every call listed
// here is implemented in full; any other cuda*-prefixed call is rejected
// during lowering.
enum class ApiId {
    Malloc,
    Free,
    Memcpy,
    MemcpyAsync,
    Memset,
    DeviceSynchronize,
    StreamCreate,
    StreamDestroy,
    StreamSynchronize,
    StreamQuery,
    StreamWaitEvent,
    EventCreate,
    EventDestroy,
    EventRecord,
    EventSynchronize,
    EventQuery,
    EventElapsedTime,
    GetLastError,
    GetErrorString,
    DeviceGetAttribute,
    DriverGetVersion,
    RuntimeGetVersion,
};

const char* apiName(ApiId id);

// The resolved, executable program: the AST plus symbol tables produced by
// lowering. Execution never consults raw identifier strings again.
struct Program {
    std::shared_ptr<TranslationUnit> tu;
    std::string filename;
    std::vector<std::string> symNames;  // symId -> spelling
    int mainIndex = -1;

    const FunctionDef& function(int index) const { return tu->functions[index]; }
    const FunctionDef& mainFn() const { return tu->functions[mainIndex]; }
    const std::string& symName(int id) const { return symNames[id]; }
};

// Name resolution, execution-space legality, and static checks.
// Throws SemanticError.
std::shared_ptr<const Program> lower(std::shared_ptr<TranslationUnit> tu);

// Convenience: tokenize + parse + lower.
std::shared_ptr<const Program> compileSource(const std::string& source,
                                             const std::string& filename);

}  // namespace mck
