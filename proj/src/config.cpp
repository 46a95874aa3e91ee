#include "loopflow/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace loopflow {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw SchemaError(path, what);
}

const json& require(const json& node, const std::string& key, const std::string& path) {
    if (!node.is_object() || !node.contains(key)) fail(path + key, "missing required key");
    return node.at(key);
}

double number_at(const json& node, const std::string& path) {
    if (!node.is_number()) fail(path, "expected a number");
    return node.get<double>();
}

double number_or(const json& node, const std::string& key, double fallback,
                 const std::string& path) {
    if (!node.is_object() || !node.contains(key)) return fallback;
    return number_at(node.at(key), path + key);
}

long integer_or(const json& node, const std::string& key, long fallback, const std::string& path) {
    if (!node.is_object() || !node.contains(key)) return fallback;
    const json& v = node.at(key);
    if (!v.is_number_integer()) fail(path + key, "expected an integer");
    return v.get<long>();
}

std::vector<double> number_list(const json& node, const std::string& path) {
    if (!node.is_array() || node.empty()) fail(path, "expected a nonempty number array");
    std::vector<double> out;
    out.reserve(node.size());
    for (size_t i = 0; i < node.size(); ++i)
        out.push_back(number_at(node[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Complex complex_at(const json& node, const std::string& path) {
    if (!node.is_array() || node.size() != 2) fail(path, "expected [re, im]");
    return Complex(number_at(node[0], path + "[0]"), number_at(node[1], path + "[1]"));
}

RationalTF tf_from(const json& node, const std::string& path) {
    const std::vector<double> num = number_list(require(node, "num", path + "."), path + ".num");
    const std::vector<double> den = number_list(require(node, "den", path + "."), path + ".den");
    const double delay = number_or(node, "delay", 0.0, path + ".");
    if (delay < 0.0) fail(path + ".delay", "delay must be >= 0");
    try {
        return RationalTF(num, den, delay);
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
}

json tf_to_json(const RationalTF& tf) {
    json node;
    node["num"] = std::vector<double>(tf.num.coeffs.data(), tf.num.coeffs.data() + tf.num.coeffs.size());
    node["den"] = std::vector<double>(tf.den.coeffs.data(), tf.den.coeffs.data() + tf.den.coeffs.size());
    node["delay"] = tf.delay;
    return node;
}

RegionShape shape_from(const json& node, const std::string& path, const std::string& base_dir,
                       json& normalized) {
    const std::string type = require(node, "type", path + ".").get<std::string>();
    normalized["type"] = type;
    if (type == "disk") {
        DiskRegion disk;
        disk.center = complex_at(require(node, "center", path + "."), path + ".center");
        disk.radius = number_at(require(node, "radius", path + "."), path + ".radius");
        disk.margin = number_or(node, "margin", 0.0, path + ".");
        if (!(disk.radius > 0.0)) fail(path + ".radius", "radius must be > 0");
        if (disk.margin < 0.0) fail(path + ".margin", "margin must be >= 0");
        normalized["center"] = {disk.center.real(), disk.center.imag()};
        normalized["radius"] = disk.radius;
        normalized["margin"] = disk.margin;
        return disk;
    }
    if (type == "halfplane") {
        HalfPlaneRegion hp;
        hp.anchor = complex_at(require(node, "anchor", path + "."), path + ".anchor");
        const Complex n = complex_at(require(node, "normal", path + "."), path + ".normal");
        const double mag = std::abs(n);
        if (!(mag > 0.0)) fail(path + ".normal", "normal must be nonzero");
        hp.outward_normal = Eigen::Vector2d(n.real() / mag, n.imag() / mag);
        hp.depth_scale = number_or(node, "depth_scale", 1.0, path + ".");
        if (!(hp.depth_scale > 0.0)) fail(path + ".depth_scale", "depth_scale must be > 0");
        normalized["anchor"] = {hp.anchor.real(), hp.anchor.imag()};
        normalized["normal"] = {hp.outward_normal[0], hp.outward_normal[1]};
        normalized["depth_scale"] = hp.depth_scale;
        return hp;
    }
    if (type == "sector_disk") {
        // Circle-criterion disk from sector slopes, with an optional margin.
        const double k1 = number_at(require(node, "k1", path + "."), path + ".k1");
        const double k2 = number_at(require(node, "k2", path + "."), path + ".k2");
        DiskRegion disk;
        try {
            disk = disk_from_sector(k1, k2);
        } catch (const InvalidSector& e) {
            fail(path, e.what());
        }
        disk.margin = number_or(node, "margin", 0.0, path + ".");
        if (disk.margin < 0.0) fail(path + ".margin", "margin must be >= 0");
        normalized["k1"] = k1;
        normalized["k2"] = k2;
        normalized["margin"] = disk.margin;
        return disk;
    }
    if (type == "gridmask") {
        std::string file = require(node, "file", path + ".").get<std::string>();
        std::filesystem::path p(file);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        const json& bounds = require(node, "bounds", path + ".");
        if (!bounds.is_array() || bounds.size() != 4)
            fail(path + ".bounds", "expected [re_min, re_max, im_min, im_max]");
        SorSettings sor;
        sor.relaxation = number_or(node, "relaxation", sor.relaxation, path + ".");
        sor.tolerance = number_or(node, "tolerance", sor.tolerance, path + ".");
        sor.max_sweeps = integer_or(node, "max_sweeps", sor.max_sweeps, path + ".");
        GridRegion region;
        try {
            region.mask = load_mask(p.string(), number_at(bounds[0], path + ".bounds[0]"),
                                    number_at(bounds[1], path + ".bounds[1]"),
                                    number_at(bounds[2], path + ".bounds[2]"),
                                    number_at(bounds[3], path + ".bounds[3]"));
            region.field = solve_laplace(region.mask, sor);
        } catch (const FileNotFound&) {
            throw;
        } catch (const std::invalid_argument& e) {
            fail(path + ".file", e.what());
        }
        normalized["file"] = p.string();
        normalized["bounds"] = bounds;
        normalized["relaxation"] = sor.relaxation;
        normalized["tolerance"] = sor.tolerance;
        normalized["max_sweeps"] = sor.max_sweeps;
        return region;
    }
    fail(path + ".type", "unknown region type '" + type + "'");
}

Eigen::VectorXd bound_list(const json& node, int n, double fill, const std::string& path) {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n, fill);
    if (!node.is_array() || static_cast<int>(node.size()) != n)
        fail(path, "expected an array of length " + std::to_string(n));
    for (int i = 0; i < n; ++i) {
        const json& v = node[static_cast<size_t>(i)];
        if (v.is_null()) continue;
        out[i] = number_at(v, path + "[" + std::to_string(i) + "]");
    }
    return out;
}

json bounds_to_json(const Eigen::VectorXd& b, double unbounded) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        if (b[i] == unbounded)
            arr.push_back(nullptr);
        else
            arr.push_back(b[i]);
    }
    return arr;
}

Nonlinearity nonlinearity_from(const json& node, const std::string& path, json& normalized) {
    const std::string type = require(node, "type", path + ".").get<std::string>();
    normalized["type"] = type;
    if (type == "identity") return Identity{};
    if (type == "saturation") {
        Saturation sat;
        sat.lo = number_at(require(node, "lo", path + "."), path + ".lo");
        sat.hi = number_at(require(node, "hi", path + "."), path + ".hi");
        if (!(sat.lo < sat.hi)) fail(path, "saturation needs lo < hi");
        normalized["lo"] = sat.lo;
        normalized["hi"] = sat.hi;
        return sat;
    }
    if (type == "sinusoidal_gain") return SinusoidalGain{};
    if (type == "sector_table") {
        const json& pts = require(node, "points", path + ".");
        if (!pts.is_array() || pts.size() < 2) fail(path + ".points", "need at least two points");
        SectorTable table;
        bool has_origin = false;
        for (size_t i = 0; i < pts.size(); ++i) {
            const Complex p = complex_at(pts[i], path + ".points[" + std::to_string(i) + "]");
            table.points.push_back({p.real(), p.imag()});
            if (p.real() == 0.0 && p.imag() == 0.0) has_origin = true;
        }
        for (size_t i = 1; i < table.points.size(); ++i)
            if (!(table.points[i][0] > table.points[i - 1][0]))
                fail(path + ".points", "abscissae must strictly increase");
        if (!has_origin) fail(path + ".points", "table must pass through the origin");
        normalized["points"] = pts;
        return table;
    }
    fail(path + ".type", "unknown nonlinearity '" + type + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail("$", std::string("not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail("$", "top level must be an object");

    RunConfig config;
    json      norm;
    constexpr double inf = std::numeric_limits<double>::infinity();

    // --- plant ---------------------------------------------------------
    const json& plant = require(doc, "plant", "");
    if (plant.is_object() && plant.contains("matrix")) {
        const json& rows = plant.at("matrix");
        if (!rows.is_array() || rows.empty()) fail("plant.matrix", "expected a nonempty array");
        const int m = static_cast<int>(rows.size());
        TFMatrix matrix(m);
        json     mnorm = json::array();
        for (int i = 0; i < m; ++i) {
            const json& row = rows[static_cast<size_t>(i)];
            const std::string rp = "plant.matrix[" + std::to_string(i) + "]";
            if (!row.is_array() || static_cast<int>(row.size()) != m)
                fail(rp, "plant matrix must be square");
            json rnorm = json::array();
            for (int j = 0; j < m; ++j) {
                matrix.entry(i, j) =
                    tf_from(row[static_cast<size_t>(j)], rp + "[" + std::to_string(j) + "]");
                rnorm.push_back(tf_to_json(matrix.entry(i, j)));
            }
            mnorm.push_back(std::move(rnorm));
        }
        config.problem.plant = std::move(matrix);
        norm["plant"]["matrix"] = std::move(mnorm);
    } else {
        RationalTF tf = tf_from(plant, "plant");
        norm["plant"] = tf_to_json(tf);
        config.problem.plant = std::move(tf);
    }

    // --- channels ------------------------------------------------------
    const json& channels = require(doc, "channels", "");
    if (!channels.is_array() || channels.empty()) fail("channels", "expected a nonempty array");
    json channels_norm = json::array();
    for (size_t c = 0; c < channels.size(); ++c) {
        const std::string cp = "channels[" + std::to_string(c) + "]";
        const json&       ch = channels[c];
        json              cnorm;

        const json& chain_node = require(ch, "chain", cp + ".");
        if (!chain_node.is_array() || chain_node.empty())
            fail(cp + ".chain", "expected a nonempty array of sections");
        CompensatorChain chain;
        json             chain_norm = json::array();
        for (size_t k = 0; k < chain_node.size(); ++k) {
            const std::string sp = cp + ".chain[" + std::to_string(k) + "]";
            FirstOrderSection sec;
            sec.zero = number_at(require(chain_node[k], "zero", sp + "."), sp + ".zero");
            sec.pole = number_at(require(chain_node[k], "pole", sp + "."), sp + ".pole");
            chain.sections.push_back(sec);
            chain_norm.push_back({{"zero", sec.zero}, {"pole", sec.pole}});
        }
        cnorm["chain"] = std::move(chain_norm);

        const json& regions = require(ch, "regions", cp + ".");
        if (!regions.is_array() || regions.empty())
            fail(cp + ".regions", "expected a nonempty array");
        RegionSpec spec;
        json       regions_norm = json::array();
        for (size_t r = 0; r < regions.size(); ++r) {
            json rnorm;
            spec.shapes.push_back(shape_from(regions[r], cp + ".regions[" + std::to_string(r) + "]",
                                             base_dir, rnorm));
            regions_norm.push_back(std::move(rnorm));
        }
        cnorm["regions"] = std::move(regions_norm);

        const int       n = chain.parameter_count();
        ParameterBounds b = ParameterBounds::unbounded(n);
        if (ch.contains("bounds")) {
            const json& bn = ch.at("bounds");
            if (bn.contains("zeros_min")) {
                const double zmin = number_at(bn.at("zeros_min"), cp + ".bounds.zeros_min");
                for (int k = 0; k < n; k += 2) b.lower[k] = zmin;
            }
            if (bn.contains("lower")) b.lower = bound_list(bn.at("lower"), n, -inf, cp + ".bounds.lower");
            if (bn.contains("upper")) b.upper = bound_list(bn.at("upper"), n, inf, cp + ".bounds.upper");
            for (int k = 0; k < n; ++k)
                if (!(b.lower[k] <= b.upper[k])) fail(cp + ".bounds", "lower exceeds upper");
        }
        cnorm["bounds"]["lower"] = bounds_to_json(b.lower, -inf);
        cnorm["bounds"]["upper"] = bounds_to_json(b.upper, inf);

        config.problem.chains.push_back(std::move(chain));
        config.problem.regions.push_back(std::move(spec));
        config.problem.bounds.push_back(std::move(b));
        channels_norm.push_back(std::move(cnorm));
    }
    norm["channels"] = std::move(channels_norm);

    // --- grid ----------------------------------------------------------
    const json grid = doc.contains("grid") ? doc.at("grid") : json::object();
    const double omega_min = number_or(grid, "omega_min", 1e-2, "grid.");
    const double omega_max = number_or(grid, "omega_max", 1e2, "grid.");
    const long   count = integer_or(grid, "count", 256, "grid.");
    if (!(omega_min > 0.0) || !(omega_max > omega_min) || count < 1)
        fail("grid", "need 0 < omega_min < omega_max and count >= 1");
    config.problem.grid = FrequencyGrid::log_spaced(omega_min, omega_max, static_cast<int>(count));
    norm["grid"] = {{"omega_min", omega_min}, {"omega_max", omega_max}, {"count", count}};

    // --- integrator ----------------------------------------------------
    const json integ = doc.contains("integrator") ? doc.at("integrator") : json::object();
    IntegratorSettings& s = config.problem.settings;
    s.eta0 = number_or(integ, "eta0", s.eta0, "integrator.");
    s.tol_force = number_or(integ, "tol_force", s.tol_force, "integrator.");
    s.tol_stall = number_or(integ, "tol_stall", s.tol_stall, "integrator.");
    s.max_iterations = integer_or(integ, "max_iterations", s.max_iterations, "integrator.");
    norm["integrator"] = {{"eta0", s.eta0},
                          {"tol_force", s.tol_force},
                          {"tol_stall", s.tol_stall},
                          {"max_iterations", s.max_iterations}};

    // --- verify --------------------------------------------------------
    const json verify = doc.contains("verify") ? doc.at("verify") : json::object();
    json       vnorm;
    json       nlnorm;
    if (verify.contains("nonlinearity")) {
        config.verify.nonlinearity = nonlinearity_from(verify.at("nonlinearity"),
                                                       "verify.nonlinearity", nlnorm);
    } else {
        nlnorm["type"] = "identity";
    }
    config.verify.horizon = number_or(verify, "horizon", 60.0, "verify.");
    config.verify.step = number_or(verify, "step", 1e-3, "verify.");
    if (!(config.verify.horizon > 0.0) || !(config.verify.step > 0.0))
        fail("verify", "horizon and step must be positive");
    const int outputs = config.problem.channel_count();
    config.verify.references = Eigen::VectorXd::Ones(outputs);
    if (verify.contains("reference")) {
        const json& ref = verify.at("reference");
        if (ref.is_number()) {
            config.verify.references.setConstant(ref.get<double>());
        } else {
            const std::vector<double> refs = number_list(ref, "verify.reference");
            if (static_cast<int>(refs.size()) != outputs)
                fail("verify.reference", "need one reference per output");
            config.verify.references =
                Eigen::Map<const Eigen::VectorXd>(refs.data(), static_cast<Eigen::Index>(refs.size()));
        }
    }
    vnorm["nonlinearity"] = std::move(nlnorm);
    vnorm["horizon"] = config.verify.horizon;
    vnorm["step"] = config.verify.step;
    vnorm["reference"] = std::vector<double>(config.verify.references.data(),
                                             config.verify.references.data() + outputs);
    norm["verify"] = std::move(vnorm);

    // --- output --------------------------------------------------------
    config.output_dir = doc.contains("output_dir") ? doc.at("output_dir").get<std::string>() : "out";
    norm["output_dir"] = config.output_dir;

    try {
        config.problem.validate();
    } catch (const std::invalid_argument& e) {
        fail("$", e.what());
    }
    config.normalized = std::move(norm);
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), std::filesystem::path(path).parent_path().string());
}

std::string serialize_config(const RunConfig& config) {
    return config.normalized.dump(2) + "\n";
}

}  // namespace loopflow
