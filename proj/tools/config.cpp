#include "config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pnc/errors.hpp"
#include "text.hpp"

namespace pnc::cli {

namespace {

struct Key {
    std::string name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

Key real(const std::string& name, double RunConfig::*field) {
    return {name, [field](const RunConfig& c) { return fmt(c.*field); },
            [name, field](RunConfig& c, const std::string& v) { c.*field = parse_double(v, name); }};
}

Key cell(const std::string& name, double UnitCellParams::*field) {
    return {name, [field](const RunConfig& c) { return fmt(c.cell.*field); },
            [name, field](RunConfig& c, const std::string& v) { c.cell.*field = parse_double(v, name); }};
}

Key integer(const std::string& name, int RunConfig::*field) {
    return {name, [field](const RunConfig& c) { return std::to_string(c.*field); },
            [name, field](RunConfig& c, const std::string& v) {
                const long n = parse_int(v, name);
                if (n < -1000000000L || n > 1000000000L) throw InvalidParameter(name + ": out of range");
                c.*field = static_cast<int>(n);
            }};
}

Key text(const std::string& name, std::string RunConfig::*field) {
    return {name, [field](const RunConfig& c) { return c.*field; },
            [field](RunConfig& c, const std::string& v) { c.*field = trim(v); }};
}

const std::vector<Key>& keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> k;
        k.push_back(text("structure", &RunConfig::structure));
        k.push_back(cell("w_nm", &UnitCellParams::w));
        k.push_back(cell("h_nm", &UnitCellParams::h));
        k.push_back(cell("a_nm", &UnitCellParams::a));
        k.push_back(cell("t_nm", &UnitCellParams::t));
        k.push_back(cell("r_nm", &UnitCellParams::r));
        k.push_back(cell("d_nm", &UnitCellParams::d));
        k.push_back(real("beam_width_nm", &RunConfig::beam_width_nm));
        k.push_back(real("beam_thickness_nm", &RunConfig::beam_thickness_nm));
        k.push_back(real("C11_GPa", &RunConfig::c11_gpa));
        k.push_back(real("C12_GPa", &RunConfig::c12_gpa));
        k.push_back(real("C44_GPa", &RunConfig::c44_gpa));
        k.push_back(real("rho_kgm3", &RunConfig::rho_kgm3));
        k.push_back({"resolution",
                     [](const RunConfig& c) {
                         return std::to_string(c.resolution.nx) + "," + std::to_string(c.resolution.ny) + "," +
                                std::to_string(c.resolution.nz);
                     },
                     [](RunConfig& c, const std::string& v) {
                         const auto parts = split(v, ',');
                         if (parts.size() != 3) throw InvalidParameter("resolution: expected nx,ny,nz");
                         c.resolution.nx = static_cast<int>(parse_int(parts[0], "resolution"));
                         c.resolution.ny = static_cast<int>(parse_int(parts[1], "resolution"));
                         c.resolution.nz = static_cast<int>(parse_int(parts[2], "resolution"));
                     }});
        k.push_back(integer("k_points", &RunConfig::k_points));
        k.push_back(integer("n_modes", &RunConfig::n_modes));
        k.push_back(real("f_min_GHz", &RunConfig::f_min_ghz));
        k.push_back(real("f_max_GHz", &RunConfig::f_max_ghz));
        k.push_back(real("broadening_GHz", &RunConfig::broadening_ghz));
        k.push_back(integer("dos_points", &RunConfig::dos_points));
        k.push_back({"dos_strict", [](const RunConfig& c) { return std::string(c.dos_strict ? "true" : "false"); },
                     [](RunConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "true" || t == "1") c.dos_strict = true;
                         else if (t == "false" || t == "0") c.dos_strict = false;
                         else throw InvalidParameter("dos_strict: expected true or false");
                     }});
        k.push_back(text("sweep_param", &RunConfig::sweep_param));
        k.push_back({"sweep_values_nm", [](const RunConfig& c) { return join(c.sweep_values_nm); },
                     [](RunConfig& c, const std::string& v) { c.sweep_values_nm = parse_list(v, "sweep_values_nm"); }});
        k.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                     [](RunConfig& c, const std::string& v) {
                         const long n = parse_int(v, "seed");
                         if (n < 0 || n > 4294967295L) throw InvalidParameter("seed: must fit in 32 bits");
                         c.seed = static_cast<unsigned>(n);
                     }});
        k.push_back(text("output_dir", &RunConfig::output_dir));
        return k;
    }();
    return table;
}

const Key& find_key(const std::string& name) {
    for (const auto& k : keys())
        if (k.name == name) return k;
    throw InvalidParameter("unknown config key '" + name + "'");
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) { find_key(key).set(*this, value); }

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& k : keys()) n.push_back(k.name);
        return n;
    }();
    return names;
}

std::string config_value(const RunConfig& config, const std::string& key) { return find_key(key).get(config); }

Material RunConfig::material() const {
    Material m;
    m.c11 = c11_gpa;
    m.c12 = c12_gpa;
    m.c44 = c44_gpa;
    m.density = rho_kgm3;
    return m;
}

GapSearch RunConfig::gap_search() const {
    GapSearch s;
    s.resolution = resolution;
    s.material = material();
    s.k_path = uniform_k_path(k_points);
    s.n_modes = n_modes;
    s.f_min = f_min_ghz;
    s.f_max = f_max_ghz;
    return s;
}

Mesh RunConfig::mesh() const {
    if (structure == "nanobeam") return build_nanobeam_mesh(beam_width_nm, beam_thickness_nm, cell.a, resolution);
    return build_unit_cell_mesh(cell, resolution);
}

void RunConfig::validate() const {
    if (structure != "pnc" && structure != "nanobeam")
        throw InvalidParameter("structure must be 'pnc' or 'nanobeam', got '" + structure + "'");
    material().validate();
    if (structure == "pnc") cell.validate();
    if (k_points < 1) throw InvalidParameter("k_points must be at least 1");
    if (n_modes < 1) throw InvalidParameter("n_modes must be at least 1");
    if (!(f_min_ghz >= 0.0 && f_max_ghz > f_min_ghz))
        throw InvalidParameter("need 0 <= f_min_GHz < f_max_GHz");
    if (!(broadening_ghz > 0.0)) throw InvalidParameter("broadening_GHz must be positive");
    if (dos_points < 2) throw InvalidParameter("dos_points must be at least 2");
    const SweepParameter p = parse_sweep_parameter(sweep_param);
    if (sweep_values_nm.empty()) throw InvalidParameter("sweep_values_nm must list at least one value");
    for (double v : sweep_values_nm) {
        UnitCellParams c = cell;
        parameter_ref(c, p) = v;
        try {
            c.validate();
            (void)CellOutline(c);
        } catch (const InvalidParameter& e) {
            throw InvalidParameter("sweep value " + fmt(v) + " nm: " + e.what());
        }
    }
    try {
        const Mesh m = mesh();
        if (3 * m.num_nodes() < n_modes) throw InvalidParameter("n_modes exceeds the number of degrees of freedom");
    } catch (const MeshingError& e) {
        throw InvalidParameter(std::string("mesh cannot be built: ") + e.what());
    }
}

RunConfig parse_config(std::istream& in, RunConfig base) {
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw InvalidParameter("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        if (!seen.insert(key).second)
            throw InvalidParameter("config line " + std::to_string(lineno) + ": repeated key '" + key + "'");
        try {
            base.set(key, body.substr(eq + 1));
        } catch (const InvalidParameter& e) {
            throw InvalidParameter("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw InvalidParameter("cannot read config file '" + path + "'");
    return parse_config(in, std::move(base));
}

std::string serialize_config(const RunConfig& config) {
    std::ostringstream out;
    for (const auto& k : keys()) out << k.name << " = " << k.get(config) << '\n';
    return out.str();
}

} // namespace pnc::cli
