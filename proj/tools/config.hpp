#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pnc/elastics.hpp"
#include "pnc/geometry.hpp"
#include "pnc/spectrum.hpp"

namespace pnc::cli {

/// Everything the mesh-based subcommands need. Keys carry their units.
struct RunConfig {
    std::string structure = "pnc"; ///< "pnc" or "nanobeam"
    UnitCellParams cell;
    double beam_width_nm = 90.0;
    double beam_thickness_nm = 70.0;
    double c11_gpa = 1079.0;
    double c12_gpa = 124.0;
    double c44_gpa = 578.0;
    double rho_kgm3 = 3515.0;
    Resolution resolution;
    int k_points = 21;
    int n_modes = 40;
    double f_min_ghz = 30.0; ///< gaps starting below this are not the main gap
    double f_max_ghz = 100.0;
    double broadening_ghz = 1.0;
    int dos_points = 2001;
    bool dos_strict = true;
    std::string sweep_param = "t";
    std::vector<double> sweep_values_nm{19.1, 22.1, 25.1};
    unsigned seed = 1;
    std::string output_dir; ///< empty: $PNC_OUTPUT_DIR, then ./pnc_out

    /// Sets one key from its text form. Throws InvalidParameter for unknown
    /// keys or malformed values.
    void set(const std::string& key, const std::string& value);
    /// Throws InvalidParameter unless every downstream precondition holds,
    /// including that the mesh can be built.
    void validate() const;

    Material material() const;
    GapSearch gap_search() const;
    Mesh mesh() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// All keys in serialization order.
const std::vector<std::string>& config_keys();

/// Reads `key = value` lines; '#' starts a comment. Repeated keys are an
/// error. Keys not present keep their defaults.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
/// Every key, one per line, with values printed losslessly.
std::string serialize_config(const RunConfig& config);
/// Text form of one key's value, as written by serialize_config.
std::string config_value(const RunConfig& config, const std::string& key);

} // namespace pnc::cli
