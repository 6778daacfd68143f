#pragma once

#include <string>

namespace pnc::cli {

/// Python/matplotlib script drawing bands (left, styled by mirror parity)
/// and DOS (right) on a shared frequency axis, with every gap listed in
/// gaps.csv shaded. It reads the CSVs next to it and writes bundle.png.
std::string bundle_plot_script();

} // namespace pnc::cli
