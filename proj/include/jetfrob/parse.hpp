/*
 * parse.hpp
 * ---------
 * Recursive-descent parser for the canonical ASCII expression grammar
 * ( ) + - * / ^, integer literals, declared symbol names, and jet names such
 * as u, u_x, u_xxy (suffix letters in independent-variable declaration order).
 */
#pragma once

#include <string>

#include "jetfrob/expr.hpp"

namespace jetfrob {

// throws std::runtime_error with position information on malformed input
Expr parse_expr(Universe* u, const std::string& text);

}  // namespace jetfrob
