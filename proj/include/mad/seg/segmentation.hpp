#pragma once

#include "mad/ir/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mad::seg {

/// Non-function part of a module. Item texts are verbatim slices of the input
/// (leading comments and attributes included); `order` remembers how the
/// header items were interleaved so reassembly can restore it.
struct ModuleHeader {
    enum class ItemKind { Import, Struct, Constant, Other };
    struct Slot {
        ItemKind kind;
        std::size_t index;
    };

    std::string preamble;    ///< comments before the module declaration
    std::string declaration; ///< `module 0x2::m {` (or `module 0x2::m;`)
    std::vector<std::string> imports;
    std::vector<std::string> structs;
    std::vector<std::string> constants;
    std::vector<std::string> others; ///< spec blocks and unrecognised items
    std::vector<Slot> order;
    std::string trailer;    ///< comments between the last item and the closing brace
    std::string postamble;  ///< text after the closing brace
    bool braced = true;
};

struct FunctionChunk {
    std::string name;
    /// Full function text: leading comments, attributes, signature and body.
    std::string raw_text;
    /// Joined from the ModuleIR by name (absent until joined).
    std::optional<ir::FunctionSig> signature;
    /// Rendered header plus signature stubs of sibling functions.
    std::string context;
};

struct SplitResult {
    ModuleHeader header;
    std::vector<FunctionChunk> chunks;
};

/// Splits one module's low-level source into header and per-function chunks
/// in declaration order. Throws NoModuleDeclaration or
/// UnbalancedBraces(position = byte offset).
SplitResult split_functions(std::string_view source);

/// Module declaration, imports, structs, constants and `;`-terminated stubs
/// of every function except `current`. Throws UnknownFunction.
std::string build_context(const ModuleHeader& header, const ir::ModuleIR& module, std::string_view current);

/// split_functions, then joins each chunk's signature from `module` by name
/// and fills its context.
SplitResult segment(std::string_view source, const ir::ModuleIR& module);

/// One function's output from the model with module-level statements lifted.
struct FunctionOutput {
    std::string name;
    std::string function_text;
    std::vector<std::string> lifted_imports;
    std::vector<std::string> dropped_items;
};

/// Extracts the single function definition in `text` (optionally wrapped in a
/// module). `use` lines are lifted; structs/constants/other items are dropped
/// with a warning. Throws MissingFunction(label) when no function is present
/// and DuplicateFunction when more than one is.
FunctionOutput parse_function_output(std::string_view text, std::string_view label = {});

/// Reassembles a module from its header and per-function outputs (in chunk
/// order). Imports are the header imports plus lifted imports, deduplicated.
/// Throws MissingFunction(name) / DuplicateFunction(name).
std::string reassemble(const ModuleHeader& header, const std::vector<std::pair<std::string, std::string>>& outputs);

} // namespace mad::seg
