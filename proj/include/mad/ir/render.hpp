#pragma once

#include "mad/ir/types.hpp"

#include <string>

namespace mad::ir {

/// Signatures-only listing: structs with abilities and fields, then function
/// declarations terminated by ';'. Declaration order; byte-stable. The text is
/// a sequence of module items, so wrapping it in `module A::m { ... }`
/// yields a parseable module (see render_stub_module).
std::string render_interface(const ModuleIR& module);

/// render_interface wrapped in a module declaration, constants included.
std::string render_stub_module(const ModuleIR& module);

/// One declaration line, e.g. `public entry fun mint(Arg0: u64, Arg1: &mut 0x2::tx_context::TxContext)`.
std::string render_signature(const FunctionSig& sig);

/// Canonical signature text ignoring parameter names. Equal for two
/// signatures exactly when they agree on name, visibility, entry flag, type
/// parameter constraints, parameter types and return types.
std::string fingerprint(const FunctionSig& sig);

} // namespace mad::ir
