#pragma once

#include "direg/bell.hpp"

#include <optional>
#include <string>
#include <vector>

namespace direg {

/// Ideal behaviors used throughout the studies:
///   chsh     1/4 + (-1)^{a+b+xy} sqrt2/8 (maximal CHSH violation)
///   chsh90   90% chsh + 10% uniform
///   tau125   optimal two-qubit strategy for I_{tau=1.25}
///   mdl      Hardy-type behavior of (|01>+|10>-|11>)/sqrt3 with sigma_x, sigma_z
///   uniform  1/4 everywhere
Behavior canonical_distribution(const std::string& name);

/// Generating strategy for the names that have one (chsh, tau125, mdl).
std::optional<QubitStrategy> canonical_strategy(const std::string& name);

const std::vector<std::string>& canonical_names();

/// Closed-form MDL behavior
/// (8ab+1)/12 [x=y=0] + (1 - [a=b=0])/3 [x=y=1] + (3ab+1)(1 - [a=x][b=y])/6 [x xor y].
Behavior mdl_closed_form();

/// Nonlocal box P(a,b|x,y) = [a xor b = xy] / 2.
Behavior pr_box();

}  // namespace direg
