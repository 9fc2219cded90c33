#include "fracbubble/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"

#include "fracbubble/acceptance.hpp"
#include "fracbubble/ansatz.hpp"
#include "fracbubble/reduced.hpp"

namespace fracbubble {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// small helpers

namespace {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(v));
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key +
                                    "': not a number: '" + v + "'");
    }
    if (pos != v.size())
        throw std::invalid_argument("config key '" + key +
                                    "': trailing characters in '" + v + "'");
    return x;
}

long parse_long(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long x = 0;
    try {
        x = std::stol(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key +
                                    "': not an integer: '" + v + "'");
    }
    if (pos != v.size())
        throw std::invalid_argument("config key '" + key +
                                    "': trailing characters in '" + v + "'");
    return x;
}

// Space- or comma-separated doubles.
std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::string t = v;
    std::replace(t.begin(), t.end(), ',', ' ');
    std::istringstream in(t);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_double(key, tok));
    return out;
}

// Points separated by ';', coordinates inside a point by space or comma.
std::vector<Point> parse_points(const std::string& key, const std::string& v) {
    std::vector<Point> pts;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto sep = v.find(';', start);
        const std::string chunk =
            trim(v.substr(start, sep == std::string::npos ? std::string::npos
                                                          : sep - start));
        if (!chunk.empty()) {
            const auto coords = parse_list(key, chunk);
            if (coords.empty() || coords.size() > 3)
                throw std::invalid_argument("config key '" + key +
                                            "': points need 1 to 3 coordinates");
            Point p{0.0, 0.0, 0.0};
            for (std::size_t i = 0; i < coords.size(); ++i) p[i] = coords[i];
            pts.push_back(p);
        }
        if (sep == std::string::npos) break;
        start = sep + 1;
    }
    return pts;
}

OpKind op_kind_from_string(const std::string& v) {
    if (v == "spectral") return OpKind::spectral;
    if (v == "restricted") return OpKind::restricted;
    if (v == "whole_space") return OpKind::whole_space;
    throw std::invalid_argument("unknown operator kind: " + v);
}

const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::spectral: return "spectral";
        case OpKind::restricted: return "restricted";
        case OpKind::whole_space: return "whole_space";
    }
    return "unknown";
}

DomainKind domain_kind_from_string(const std::string& v) {
    if (v == "interval") return DomainKind::interval;
    if (v == "rectangle") return DomainKind::rectangle;
    if (v == "ball") return DomainKind::ball;
    if (v == "half_space") return DomainKind::half_space_trunc;
    throw std::invalid_argument("unknown domain kind: " + v);
}

std::string join_floats(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += format_float(v[i]);
    }
    return out;
}

std::string join_points(const std::vector<Point>& pts, int n) {
    std::string out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) out += "; ";
        for (int c = 0; c < n; ++c) {
            if (c) out += ' ';
            out += format_float(pts[i][c]);
        }
    }
    return out;
}

struct PhaseClock {
    std::chrono::steady_clock::time_point t0 =
        std::chrono::steady_clock::now();
    double lap() {
        const auto t1 = std::chrono::steady_clock::now();
        const double dt = std::chrono::duration<double>(t1 - t0).count();
        t0 = t1;
        return dt;
    }
};

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec)
        throw std::invalid_argument("cannot create output directory '" + path +
                                    "': " + ec.message());
}

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::pair<std::string, double>>& timings,
                    const std::vector<std::string>& outputs) {
    json j;
    j["command"] = command;
    j["config"] = cfg.canonical();
    j["versions"] = {
        {"fracbubble", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
#ifdef _OPENMP
        {"openmp", _OPENMP},
#else
        {"openmp", "off"},
#endif
        {"compiler", __VERSION__},
    };
#ifdef _OPENMP
    j["threads"] = omp_get_max_threads();
#else
    j["threads"] = 1;
#endif
    json t;
    for (const auto& [name, sec] : timings) t[name] = sec;
    j["timings"] = t;
    j["outputs"] = outputs;
    write_json_file(
        (fs::path(cfg.out_dir) / ("manifest_" + command + ".json")).string(),
        j.dump(), cfg.hash());
}

void apply_thread_count(const ExperimentConfig& cfg) {
#ifdef _OPENMP
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#else
    (void)cfg;
#endif
}

} // namespace

// ---------------------------------------------------------------------------
// config

void ExperimentConfig::validate() const {
    p.validate();
    if (domain.n != p.n)
        throw std::invalid_argument(
            "domain dimension must equal n: domain has n = " +
            std::to_string(domain.n) + ", config has n = " + std::to_string(p.n));
    domain.validate();

    if (eps.empty()) throw std::invalid_argument("eps list must not be empty");
    for (double e : eps) {
        if (!(e > 0.0) || !std::isfinite(e))
            throw std::invalid_argument("eps must be positive and finite");
        if (!(p.p_star() - e > 1.0))
            throw std::invalid_argument(
                "eps too large: the subcritical exponent p* - eps must stay "
                "above 1");
    }
    if (m < 1) throw std::invalid_argument("m must be at least 1");

    if (xi.empty() != Lambda.empty())
        throw std::invalid_argument("xi and lambda must be given together");
    if (!xi.empty()) {
        if (static_cast<int>(xi.size()) != m)
            throw std::invalid_argument("xi must list exactly m points");
        if (static_cast<int>(Lambda.size()) != m)
            throw std::invalid_argument("lambda must list exactly m values");
        for (const Point& x : xi)
            if (!domain.contains(x))
                throw std::invalid_argument(
                    "xi points must lie inside the domain");
        for (double L : Lambda)
            if (!(L > 0.0))
                throw std::invalid_argument("lambda values must be positive");
    }

    if (!(scan_xi_lo < scan_xi_hi))
        throw std::invalid_argument("scan.xi_lo must be below scan.xi_hi");
    if (scan_xi_cells < 1)
        throw std::invalid_argument("scan.xi_cells must be at least 1");
    if (!(scan_lambda_lo > 0.0 && scan_lambda_lo < scan_lambda_hi))
        throw std::invalid_argument(
            "scan.lambda range must be positive with lo below hi");
    if (scan_lambda_cells < 1)
        throw std::invalid_argument("scan.lambda_cells must be at least 1");

    if (grid_cells < 8)
        throw std::invalid_argument("grid must have at least 8 cells per axis");
    if (green_samples < 4)
        throw std::invalid_argument(
            "green.samples must be at least 4 (tabulated kernels interpolate "
            "across samples)");
    if (!(mesh_h0_factor > 0.0 && mesh_h0_factor <= 0.25))
        throw std::invalid_argument("mesh.h0_factor must lie in (0, 1/4]");
    if (!(mesh_growth > 1.0 && mesh_growth <= 2.0))
        throw std::invalid_argument("mesh.growth must lie in (1, 2]");

    if (!(tol > 0.0 && tol < 1.0))
        throw std::invalid_argument("tol must lie in (0, 1)");
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
    if (out_dir.empty()) throw std::invalid_argument("out must not be empty");
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream out;
    out << "n = " << p.n << "\n";
    out << "s = " << format_float(p.s) << "\n";
    out << "criticality = " << to_string(crit) << "\n";
    out << "operator = " << op_kind_name(op_kind) << "\n";
    out << "domain = " << kind_name(domain.kind) << "\n";
    switch (domain.kind) {
        case DomainKind::interval:
            out << "a = " << format_float(domain.a) << "\n";
            out << "b = " << format_float(domain.b) << "\n";
            break;
        case DomainKind::rectangle:
            out << "ax = " << format_float(domain.ax) << "\n";
            out << "bx = " << format_float(domain.bx) << "\n";
            out << "ay = " << format_float(domain.ay) << "\n";
            out << "by = " << format_float(domain.by) << "\n";
            break;
        case DomainKind::ball:
            out << "center = " << join_points({domain.center}, p.n) << "\n";
            out << "radius = " << format_float(domain.radius) << "\n";
            break;
        case DomainKind::half_space_trunc:
            out << "b = " << format_float(domain.b) << "\n";
            out << "roi = " << format_float(domain.roi) << "\n";
            break;
    }
    out << "eps = " << join_floats(eps) << "\n";
    out << "m = " << m << "\n";
    if (!xi.empty()) {
        out << "xi = " << join_points(xi, p.n) << "\n";
        out << "lambda = " << join_floats(Lambda) << "\n";
    }
    out << "scan.xi_lo = " << format_float(scan_xi_lo) << "\n";
    out << "scan.xi_hi = " << format_float(scan_xi_hi) << "\n";
    out << "scan.xi_cells = " << scan_xi_cells << "\n";
    out << "scan.lambda_lo = " << format_float(scan_lambda_lo) << "\n";
    out << "scan.lambda_hi = " << format_float(scan_lambda_hi) << "\n";
    out << "scan.lambda_cells = " << scan_lambda_cells << "\n";
    out << "grid = " << grid_cells << "\n";
    out << "green.samples = " << green_samples << "\n";
    out << "mesh.h0_factor = " << format_float(mesh_h0_factor) << "\n";
    out << "mesh.growth = " << format_float(mesh_growth) << "\n";
    out << "tol = " << format_float(tol) << "\n";
    out << "seed = " << seed << "\n";
    return out.str();
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a(canonical())); }

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;

    // staging for the domain, assembled once every line is read
    std::string domain_kind = "interval";
    double a = -1.0, b = 1.0, radius = 1.0, roi = 1.0;
    double ax = 0.0, bx = 1.0, ay = 0.0, by = 1.0;
    Point center{0.0, 0.0, 0.0};

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": empty key or value");

        if (key == "n") cfg.p.n = static_cast<int>(parse_long(key, val));
        else if (key == "s") cfg.p.s = parse_double(key, val);
        else if (key == "criticality") cfg.crit = criticality_from_string(val);
        else if (key == "operator") cfg.op_kind = op_kind_from_string(val);
        else if (key == "domain") domain_kind = val;
        else if (key == "a") a = parse_double(key, val);
        else if (key == "b") b = parse_double(key, val);
        else if (key == "ax") ax = parse_double(key, val);
        else if (key == "bx") bx = parse_double(key, val);
        else if (key == "ay") ay = parse_double(key, val);
        else if (key == "by") by = parse_double(key, val);
        else if (key == "center") {
            const auto pts = parse_points(key, val);
            if (pts.size() != 1)
                throw std::invalid_argument("config key 'center': one point");
            center = pts[0];
        }
        else if (key == "radius") radius = parse_double(key, val);
        else if (key == "roi") roi = parse_double(key, val);
        else if (key == "eps") cfg.eps = parse_list(key, val);
        else if (key == "m") cfg.m = static_cast<int>(parse_long(key, val));
        else if (key == "xi") cfg.xi = parse_points(key, val);
        else if (key == "lambda") cfg.Lambda = parse_list(key, val);
        else if (key == "scan.xi_lo") cfg.scan_xi_lo = parse_double(key, val);
        else if (key == "scan.xi_hi") cfg.scan_xi_hi = parse_double(key, val);
        else if (key == "scan.xi_cells")
            cfg.scan_xi_cells = static_cast<int>(parse_long(key, val));
        else if (key == "scan.lambda_lo")
            cfg.scan_lambda_lo = parse_double(key, val);
        else if (key == "scan.lambda_hi")
            cfg.scan_lambda_hi = parse_double(key, val);
        else if (key == "scan.lambda_cells")
            cfg.scan_lambda_cells = static_cast<int>(parse_long(key, val));
        else if (key == "grid")
            cfg.grid_cells = static_cast<int>(parse_long(key, val));
        else if (key == "green.samples")
            cfg.green_samples = static_cast<int>(parse_long(key, val));
        else if (key == "mesh.h0_factor")
            cfg.mesh_h0_factor = parse_double(key, val);
        else if (key == "mesh.growth") cfg.mesh_growth = parse_double(key, val);
        else if (key == "tol") cfg.tol = parse_double(key, val);
        else if (key == "seed")
            cfg.seed = static_cast<unsigned>(parse_long(key, val));
        else if (key == "threads")
            cfg.threads = static_cast<int>(parse_long(key, val));
        else if (key == "out") cfg.out_dir = val;
        else
            throw std::invalid_argument("unknown config key: " + key);
    }

    DomainSpec dom;
    dom.kind = domain_kind_from_string(domain_kind);
    dom.n = cfg.p.n;
    switch (dom.kind) {
        case DomainKind::interval:
            dom.a = a;
            dom.b = b;
            break;
        case DomainKind::rectangle:
            dom.ax = ax; dom.bx = bx; dom.ay = ay; dom.by = by;
            break;
        case DomainKind::ball:
            dom.center = center;
            dom.radius = radius;
            break;
        case DomainKind::half_space_trunc:
            dom.a = 0.0;
            dom.b = b;
            dom.roi = roi;
            break;
    }
    cfg.domain = dom;
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& o) {
    if (o.out) cfg.out_dir = *o.out;
    if (o.threads) cfg.threads = *o.threads;
    if (o.tol) cfg.tol = *o.tol;
    if (o.seed) cfg.seed = *o.seed;
    cfg.validate();
}

// ---------------------------------------------------------------------------
// formatting and files

std::string format_float(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

TableWriter::TableWriter(const std::string& path,
                         const std::string& config_hash,
                         const std::vector<std::string>& columns)
    : width_(columns.size()) {
    const fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    out_.open(path, std::ios::trunc);
    if (!out_)
        throw std::invalid_argument("cannot open output file: " + path);
    out_ << "# config_hash=" << config_hash << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
        out_ << (i ? "," : "") << columns[i];
    out_ << "\n" << std::flush;
}

void TableWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        cells[i] = format_float(values[i]);
    row_mixed(cells);
}

void TableWriter::row_mixed(const std::vector<std::string>& cells) {
    if (cells.size() != width_)
        throw std::invalid_argument("table row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << (i ? "," : "") << cells[i];
    out_ << "\n" << std::flush;
}

void write_json_file(const std::string& path, const std::string& json_text,
                     const std::string& config_hash) {
    json j = json::parse(json_text);
    j["config_hash"] = config_hash;
    const fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::invalid_argument("cannot open output file: " + path);
    out << j.dump(2) << "\n";
}

std::string read_file_hash(const std::string& path) {
    std::ifstream in(path);
    if (!in) return "";
    std::string first;
    std::getline(in, first);
    const std::string tag = "# config_hash=";
    if (first.rfind(tag, 0) == 0) return trim(first.substr(tag.size()));
    in.seekg(0);
    try {
        json j;
        in >> j;
        if (j.is_object() && j.contains("config_hash") &&
            j["config_hash"].is_string())
            return j["config_hash"].get<std::string>();
    } catch (const std::exception&) {
    }
    return "";
}

std::string cache_directory() {
    const char* v = std::getenv(kCacheEnvVar);
    return v ? std::string(v) : std::string();
}

// ---------------------------------------------------------------------------
// green-table cache

namespace {

std::string green_cache_key(const DiscreteOperator& op,
                            const std::vector<Point>& samples) {
    std::ostringstream k;
    k << op_kind_name(op.kind) << "\n" << kind_name(op.domain.kind) << "\n"
      << op.domain.n << "\n" << format_float(op.s) << "\n"
      << format_float(op.domain.a) << " " << format_float(op.domain.b) << " "
      << format_float(op.domain.ax) << " " << format_float(op.domain.bx) << " "
      << format_float(op.domain.ay) << " " << format_float(op.domain.by) << " "
      << format_float(op.domain.center[0]) << " "
      << format_float(op.domain.center[1]) << " "
      << format_float(op.domain.radius) << " "
      << format_float(op.domain.roi) << "\n"
      << op.grid.size() << " " << format_float(op.grid.h) << "\n";
    for (const Point& x : samples)
        k << format_float(x[0]) << " " << format_float(x[1]) << "\n";
    return hex64(fnv1a(k.str()));
}

bool load_green_cache(const std::string& path, const DiscreteOperator& op,
                      GreenTable& table) {
    std::ifstream in(path);
    if (!in) return false;
    std::size_t ns = 0, nn = 0;
    if (!(in >> ns >> nn)) return false;
    if (nn != static_cast<std::size_t>(op.grid.size())) return false;
    table.op = &op;
    table.samples.assign(ns, Point{0.0, 0.0, 0.0});
    table.robin_values.assign(ns, 0.0);
    table.G.assign(ns, Field(nn, 0.0));
    table.H.assign(ns, Field(nn, 0.0));
    for (std::size_t k = 0; k < ns; ++k) {
        if (!(in >> table.samples[k][0] >> table.samples[k][1] >>
              table.samples[k][2] >> table.robin_values[k]))
            return false;
        for (std::size_t j = 0; j < nn; ++j)
            if (!(in >> table.G[k][j])) return false;
        for (std::size_t j = 0; j < nn; ++j)
            if (!(in >> table.H[k][j])) return false;
    }
    return true;
}

void store_green_cache(const std::string& path, const GreenTable& table) {
    const fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) return; // cache is best-effort, the table is already built
    const std::size_t ns = table.samples.size();
    const std::size_t nn = ns ? table.G[0].size() : 0;
    out << ns << " " << nn << "\n";
    for (std::size_t k = 0; k < ns; ++k) {
        out << format_float(table.samples[k][0]) << " "
            << format_float(table.samples[k][1]) << " "
            << format_float(table.samples[k][2]) << " "
            << format_float(table.robin_values[k]) << "\n";
        for (std::size_t j = 0; j < nn; ++j)
            out << format_float(table.G[k][j]) << (j + 1 == nn ? "\n" : " ");
        for (std::size_t j = 0; j < nn; ++j)
            out << format_float(table.H[k][j]) << (j + 1 == nn ? "\n" : " ");
    }
}

} // namespace

GreenTable load_or_build_green_table(const DiscreteOperator& op,
                                     const std::vector<Point>& samples,
                                     const ConstantSet& cs) {
    const std::string dir = cache_directory();
    if (dir.empty()) return build_green_table(op, samples, cs);
    const std::string path =
        (fs::path(dir) / ("green-" + green_cache_key(op, samples) + ".tab"))
            .string();
    GreenTable table;
    if (load_green_cache(path, op, table)) return table;
    table = build_green_table(op, samples, cs);
    store_green_cache(path, table);
    return table;
}

// ---------------------------------------------------------------------------
// shared command plumbing

namespace {

// Default Green sample points: a ray through the domain, clear of the
// boundary margin the diagonal extrapolation needs.
std::vector<Point> default_samples(const ExperimentConfig& cfg) {
    const DomainSpec& d = cfg.domain;
    std::vector<Point> pts;
    const int k = cfg.green_samples;
    const auto lin = [&](double lo, double hi, int i) {
        return k == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / double(k - 1);
    };
    switch (d.kind) {
        case DomainKind::interval:
            for (int i = 0; i < k; ++i) {
                const double margin = 0.15 * (d.b - d.a);
                pts.push_back(make_point(lin(d.a + margin, d.b - margin, i)));
            }
            break;
        case DomainKind::ball:
            for (int i = 0; i < k; ++i) {
                const double r = lin(-0.7 * d.radius, 0.7 * d.radius, i);
                Point x = d.center;
                x[0] += r;
                pts.push_back(x);
            }
            break;
        case DomainKind::rectangle:
            for (int i = 0; i < k; ++i) {
                const double mx = 0.15 * (d.bx - d.ax);
                const double my = 0.15 * (d.by - d.ay);
                pts.push_back(make_point(lin(d.ax + mx, d.bx - mx, i),
                                         lin(d.ay + my, d.by - my, i)));
            }
            break;
        case DomainKind::half_space_trunc:
            for (int i = 0; i < k; ++i)
                pts.push_back(make_point(lin(0.15 * d.roi, d.roi, i)));
            break;
    }
    return pts;
}

void require_solve_capable(const ExperimentConfig& cfg, const char* what) {
    if (cfg.op_kind == OpKind::whole_space)
        throw std::invalid_argument(
            std::string(what) +
            " needs a solve-capable operator kind (spectral or restricted)");
}

// The landscape kernel a config asks for: closed forms on balls, a tabulated
// Green solve on intervals. The operator and table must outlive the kernel,
// so the caller keeps both stores alive.
PairKernel make_pair_kernel(const ExperimentConfig& cfg, const ConstantSet& cs,
                            std::unique_ptr<DiscreteOperator>& op_store,
                            std::unique_ptr<GreenTable>& table_store) {
    if (cfg.domain.kind == DomainKind::ball)
        return closed_ball_kernel(cs, cfg.domain);
    if (cfg.domain.kind == DomainKind::interval) {
        require_solve_capable(cfg, "a tabulated landscape kernel");
        op_store = std::make_unique<DiscreteOperator>(build_operator(
            cfg.domain, cfg.p, Grid::make(cfg.domain, cfg.grid_cells),
            cfg.op_kind));
        table_store = std::make_unique<GreenTable>(
            load_or_build_green_table(*op_store, default_samples(cfg), cs));
        return table_kernel(*table_store, cs);
    }
    throw std::invalid_argument(
        "landscape commands need an interval or ball domain");
}

// Odometer over the scan axes: m*n point coordinates, then m rates.
struct ScanGrid {
    int dims = 0;
    std::vector<std::vector<double>> axis;
    std::vector<int> idx;
    bool done = false;

    explicit ScanGrid(const ExperimentConfig& cfg) {
        dims = cfg.m * cfg.p.n + cfg.m;
        const auto axis_of = [](double lo, double hi, int cells) {
            std::vector<double> v(cells);
            for (int i = 0; i < cells; ++i)
                v[i] = cells == 1 ? 0.5 * (lo + hi)
                                  : lo + (hi - lo) * i / double(cells - 1);
            return v;
        };
        for (int i = 0; i < cfg.m * cfg.p.n; ++i)
            axis.push_back(
                axis_of(cfg.scan_xi_lo, cfg.scan_xi_hi, cfg.scan_xi_cells));
        for (int i = 0; i < cfg.m; ++i)
            axis.push_back(axis_of(cfg.scan_lambda_lo, cfg.scan_lambda_hi,
                                   cfg.scan_lambda_cells));
        idx.assign(dims, 0);
    }

    std::size_t cardinality() const {
        std::size_t total = 1;
        for (const auto& a : axis) total *= a.size();
        return total;
    }

    void configuration(const ExperimentConfig& cfg, std::vector<Point>& xi,
                       std::vector<double>& Lambda) const {
        xi.assign(cfg.m, Point{0.0, 0.0, 0.0});
        Lambda.assign(cfg.m, 0.0);
        int d = 0;
        for (int i = 0; i < cfg.m; ++i)
            for (int c = 0; c < cfg.p.n; ++c) xi[i][c] = axis[d][idx[d]], ++d;
        for (int i = 0; i < cfg.m; ++i) Lambda[i] = axis[d][idx[d]], ++d;
    }

    void advance() {
        for (int d = dims - 1; d >= 0; --d) {
            if (++idx[d] < static_cast<int>(axis[d].size())) return;
            idx[d] = 0;
        }
        done = true;
    }
};

std::vector<std::string> point_columns(const ExperimentConfig& cfg,
                                       const char* stem) {
    std::vector<std::string> cols;
    for (int i = 0; i < cfg.m; ++i)
        for (int c = 0; c < cfg.p.n; ++c)
            cols.push_back(std::string(stem) + std::to_string(i + 1) + "_" +
                           std::to_string(c));
    return cols;
}

int run_guarded(const ExperimentConfig& cfg, std::ostream& log,
                const std::function<int()>& body) {
    try {
        cfg.validate();
        apply_thread_count(cfg);
        return body();
    } catch (const std::invalid_argument& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        log << "numeric failure: " << e.what() << "\n";
        return 3;
    }
}

} // namespace

// ---------------------------------------------------------------------------
// commands

int cmd_constants(const ExperimentConfig& cfg, std::ostream& log) {
    return run_guarded(cfg, log, [&]() -> int {
        ensure_dir(cfg.out_dir);
        PhaseClock clock;
        const ConstantSet cs = resolve_constants(cfg.p, cfg.tol);
        const double t_resolve = clock.lap();

        const std::string path =
            (fs::path(cfg.out_dir) / "constants.json").string();
        write_json_file(path, cs.to_json(), cfg.hash());

        double worst = 0.0;
        std::string worst_name;
        for (const auto& [name, r] : cs.residuals)
            if (r > worst) worst = r, worst_name = name;
        log << "constants resolved: " << cs.residuals.size()
            << " residuals, worst " << format_float(worst) << " (" << worst_name
            << ")\n";
        write_manifest(cfg, "constants",
                       {{"resolve", t_resolve}, {"write", clock.lap()}},
                       {"constants.json"});
        if (!(worst < cfg.tol)) {
            log << "numeric failure: residual '" << worst_name
                << "' is not below tol = " << format_float(cfg.tol) << "\n";
            return 3;
        }
        return 0;
    });
}

int cmd_green(const ExperimentConfig& cfg, std::ostream& log) {
    return run_guarded(cfg, log, [&]() -> int {
        require_solve_capable(cfg, "the Green table");
        ensure_dir(cfg.out_dir);
        PhaseClock clock;
        const ConstantSet cs = resolve_constants(cfg.p);
        const DiscreteOperator op = build_operator(
            cfg.domain, cfg.p, Grid::make(cfg.domain, cfg.grid_cells),
            cfg.op_kind);
        const double t_build = clock.lap();

        const std::vector<Point> samples =
            cfg.xi.empty() ? default_samples(cfg) : cfg.xi;
        const GreenTable table = load_or_build_green_table(op, samples, cs);
        const double t_table = clock.lap();

        std::vector<std::string> cols{"sample"};
        for (int c = 0; c < cfg.p.n; ++c) cols.push_back("xi_" + std::to_string(c));
        for (int c = 0; c < cfg.p.n; ++c) cols.push_back("x_" + std::to_string(c));
        cols.push_back("G");
        cols.push_back("H");
        TableWriter tw((fs::path(cfg.out_dir) / "green_table.csv").string(),
                       cfg.hash(), cols);
        for (std::size_t k = 0; k < table.samples.size(); ++k)
            for (int j = 0; j < op.grid.size(); ++j) {
                std::vector<double> row{double(k)};
                for (int c = 0; c < cfg.p.n; ++c) row.push_back(table.samples[k][c]);
                for (int c = 0; c < cfg.p.n; ++c) row.push_back(op.grid.nodes[j][c]);
                row.push_back(table.G[k][j]);
                row.push_back(table.H[k][j]);
                tw.row(row);
            }

        std::vector<std::string> rcols{"sample"};
        for (int c = 0; c < cfg.p.n; ++c) rcols.push_back("xi_" + std::to_string(c));
        rcols.push_back("dist_boundary");
        rcols.push_back("robin");
        TableWriter rw((fs::path(cfg.out_dir) / "robin.csv").string(),
                       cfg.hash(), rcols);
        for (std::size_t k = 0; k < table.samples.size(); ++k) {
            std::vector<double> row{double(k)};
            for (int c = 0; c < cfg.p.n; ++c) row.push_back(table.samples[k][c]);
            row.push_back(cfg.domain.dist_to_boundary(table.samples[k]));
            row.push_back(table.robin_values[k]);
            rw.row(row);
        }
        log << "green table: " << table.samples.size() << " samples x "
            << op.grid.size() << " nodes\n";
        write_manifest(cfg, "green",
                       {{"operator", t_build},
                        {"table", t_table},
                        {"write", clock.lap()}},
                       {"green_table.csv", "robin.csv"});
        return 0;
    });
}

int cmd_robin(const ExperimentConfig& cfg, std::ostream& log) {
    return run_guarded(cfg, log, [&]() -> int {
        require_solve_capable(cfg, "the Robin scan");
        ensure_dir(cfg.out_dir);
        PhaseClock clock;
        const ConstantSet cs = resolve_constants(cfg.p);
        const DiscreteOperator op = build_operator(
            cfg.domain, cfg.p, Grid::make(cfg.domain, cfg.grid_cells),
            cfg.op_kind);
        const double t_build = clock.lap();

        // rays from the domain center, radii ascending so monotonicity of the
        // Robin function along each ray is visible row by row
        const DomainSpec& d = cfg.domain;
        Point c0{0.0, 0.0, 0.0};
        std::vector<Point> dirs;
        double r_max = 0.0;
        switch (d.kind) {
            case DomainKind::interval:
                c0 = make_point(0.5 * (d.a + d.b));
                dirs = {make_point(1.0), make_point(-1.0)};
                r_max = 0.5 * (d.b - d.a);
                break;
            case DomainKind::ball:
                c0 = d.center;
                dirs = {make_point(1.0), make_point(-1.0)};
                if (d.n == 2) {
                    dirs.push_back(make_point(0.0, 1.0));
                    dirs.push_back(make_point(0.0, -1.0));
                }
                r_max = d.radius;
                break;
            case DomainKind::rectangle:
                c0 = make_point(0.5 * (d.ax + d.bx), 0.5 * (d.ay + d.by));
                dirs = {make_point(1.0), make_point(0.0, 1.0)};
                r_max = 0.5 * std::min(d.bx - d.ax, d.by - d.ay);
                break;
            case DomainKind::half_space_trunc:
                c0 = make_point(d.roi);
                dirs = {make_point(-1.0)};
                r_max = d.roi;
                break;
        }
        // stay clear of both the ring radius and the mollifier footprint
        const double margin = std::max(0.12 * r_max, 6.0 * op.grid.h);
        if (margin >= r_max)
            throw std::invalid_argument(
                "grid too coarse for a Robin scan: the boundary margin "
                "swallows the whole ray");

        std::vector<std::string> cols{"ray", "r"};
        for (int c = 0; c < cfg.p.n; ++c) cols.push_back("x_" + std::to_string(c));
        cols.push_back("dist_boundary");
        cols.push_back("robin");
        TableWriter tw((fs::path(cfg.out_dir) / "robin_scan.csv").string(),
                       cfg.hash(), cols);
        int rows = 0;
        for (std::size_t ray = 0; ray < dirs.size(); ++ray)
            for (int i = 0; i < cfg.scan_xi_cells; ++i) {
                const double r =
                    cfg.scan_xi_cells == 1
                        ? 0.0
                        : (r_max - margin) * i / double(cfg.scan_xi_cells - 1);
                Point x = c0;
                for (int c = 0; c < cfg.p.n; ++c) x[c] += r * dirs[ray][c];
                std::vector<double> row{double(ray), r};
                for (int c = 0; c < cfg.p.n; ++c) row.push_back(x[c]);
                row.push_back(d.dist_to_boundary(x));
                row.push_back(robin(op, x, cs));
                tw.row(row);
                ++rows;
            }
        log << "robin scan: " << rows << " rows over " << dirs.size()
            << " rays\n";
        write_manifest(cfg, "robin",
                       {{"operator", t_build}, {"scan", clock.lap()}},
                       {"robin_scan.csv"});
        return 0;
    });
}

int cmd_psi_scan(const ExperimentConfig& cfg, std::ostream& log) {
    return run_guarded(cfg, log, [&]() -> int {
        ensure_dir(cfg.out_dir);
        PhaseClock clock;
        const ConstantSet cs = resolve_constants(cfg.p);
        std::unique_ptr<DiscreteOperator> op_store;
        std::unique_ptr<GreenTable> table_store;
        const PairKernel kernel =
            make_pair_kernel(cfg, cs, op_store, table_store);
        const double t_kernel = clock.lap();

        ScanGrid grid(cfg);
        if (grid.cardinality() > 5'000'000)
            throw std::invalid_argument(
                "scan grid too large: " + std::to_string(grid.cardinality()) +
                " points");

        std::vector<std::string> cols = point_columns(cfg, "xi");
        for (int i = 0; i < cfg.m; ++i)
            cols.push_back("lambda" + std::to_string(i + 1));
        cols.push_back("admissible");
        cols.push_back("psi");
        cols.push_back("grad_norm");
        TableWriter tw((fs::path(cfg.out_dir) / "psi_scan.csv").string(),
                       cfg.hash(), cols);

        std::size_t rows = 0, admissible = 0;
        std::vector<Point> xi;
        std::vector<double> Lambda;
        while (!grid.done) {
            grid.configuration(cfg, xi, Lambda);
            std::vector<double> row;
            for (int i = 0; i < cfg.m; ++i)
                for (int c = 0; c < cfg.p.n; ++c) row.push_back(xi[i][c]);
            for (int i = 0; i < cfg.m; ++i) row.push_back(Lambda[i]);
            try {
                const PsiPoint pt = psi_eval(kernel, xi, Lambda, cfg.crit);
                double g2 = 0.0;
                for (double g : pt.gradient) g2 += g * g;
                row.push_back(1.0);
                row.push_back(pt.value);
                row.push_back(std::sqrt(g2));
                ++admissible;
            } catch (const std::domain_error&) {
                row.push_back(0.0);
                row.push_back(std::nan(""));
                row.push_back(std::nan(""));
            }
            tw.row(row);
            ++rows;
            grid.advance();
        }
        log << "psi scan: " << rows << " rows (" << admissible
            << " admissible)\n";
        write_manifest(cfg, "psi_scan",
                       {{"kernel", t_kernel}, {"scan", clock.lap()}},
                       {"psi_scan.csv"});
        return 0;
    });
}

int cmd_find_critical(const ExperimentConfig& cfg, std::ostream& log) {
    return run_guarded(cfg, log, [&]() -> int {
        ensure_dir(cfg.out_dir);
        PhaseClock clock;
        const ConstantSet cs = resolve_constants(cfg.p);
        std::unique_ptr<DiscreteOperator> op_store;
        std::unique_ptr<GreenTable> table_store;
        const PairKernel kernel =
            make_pair_kernel(cfg, cs, op_store, table_store);
        const double t_kernel = clock.lap();

        std::vector<PsiPoint> seeds;
        if (!cfg.xi.empty()) {
            seeds.push_back(psi_eval(kernel, cfg.xi, cfg.Lambda, cfg.crit));
        } else {
            ScanGrid grid(cfg);
            if (grid.cardinality() > 200'000)
                throw std::invalid_argument(
                    "seed grid too large: " +
                    std::to_string(grid.cardinality()) + " points");
            std::vector<Point> xi;
            std::vector<double> Lambda;
            while (!grid.done) {
                grid.configuration(cfg, xi, Lambda);
                try {
                    seeds.push_back(psi_eval(kernel, xi, Lambda, cfg.crit));
                } catch (const std::domain_error&) {
                }
                grid.advance();
            }
        }
        if (seeds.empty())
            throw std::invalid_argument(
                "no admissible seeds: every scan point violates the "
                "separation, boundary, or rate bounds");
        const double t_seed = clock.lap();

        const std::vector<CriticalPoint> cps =
            find_critical(kernel, seeds, cfg.tol, cfg.crit);
        const double t_search = clock.lap();

        std::vector<std::string> cols{"converged"};
        for (const auto& c : point_columns(cfg, "xi")) cols.push_back(c);
        for (int i = 0; i < cfg.m; ++i)
            cols.push_back("lambda" + std::to_string(i + 1));
        cols.push_back("psi");
        cols.push_back("grad_norm");
        cols.push_back("n_pos");
        cols.push_back("n_neg");
        cols.push_back("n_zero");
        TableWriter tw(
            (fs::path(cfg.out_dir) / "critical_points.csv").string(),
            cfg.hash(), cols);
        int converged = 0;
        for (const CriticalPoint& cp : cps) {
            std::vector<double> row{cp.converged ? 1.0 : 0.0};
            for (int i = 0; i < cfg.m; ++i)
                for (int c = 0; c < cfg.p.n; ++c) row.push_back(cp.xi[i][c]);
            for (int i = 0; i < cfg.m; ++i) row.push_back(cp.Lambda[i]);
            double value = std::nan("");
            if (cp.converged) {
                try {
                    value = psi_eval(kernel, cp.xi, cp.Lambda, cfg.crit).value;
                } catch (const std::domain_error&) {
                }
                ++converged;
            }
            row.push_back(value);
            row.push_back(cp.grad_norm);
            row.push_back(cp.n_pos);
            row.push_back(cp.n_neg);
            row.push_back(cp.n_zero);
            tw.row(row);
        }
        log << "critical points: " << converged << " converged of "
            << cps.size() << " distinct (from " << seeds.size() << " seeds)\n";
        write_manifest(cfg, "find_critical",
                       {{"kernel", t_kernel},
                        {"seeds", t_seed},
                        {"search", t_search},
                        {"write", clock.lap()}},
                       {"critical_points.csv"});
        return 0;
    });
}

int cmd_ansatz(const ExperimentConfig& cfg, std::ostream& log) {
    return run_guarded(cfg, log, [&]() -> int {
        if (cfg.xi.empty())
            throw std::invalid_argument(
                "the ansatz command needs explicit xi and lambda seeds");
        ensure_dir(cfg.out_dir);
        PhaseClock clock;
        const ConstantSet cs = resolve_constants(cfg.p);

        const ExpansionCheck ex = energy_expansion_check(
            cfg.p, cfg.crit, cfg.domain, cfg.xi, cfg.Lambda, cs, cfg.eps,
            cfg.mesh_h0_factor, cfg.mesh_growth);
        const double t_expansion = clock.lap();

        TableWriter tw((fs::path(cfg.out_dir) / "expansion.csv").string(),
                       cfg.hash(), {"eps", "J", "D", "richardson"});
        for (std::size_t k = 0; k < ex.eps.size(); ++k)
            tw.row({ex.eps[k], ex.J[k], ex.D[k],
                    k == 0 ? std::nan("") : ex.richardson[k - 1]});

        // projected nonlinear solve at the sharpest eps of the ladder
        AnsatzConfig ac;
        ac.p = cfg.p;
        ac.crit = cfg.crit;
        ac.eps = *std::min_element(cfg.eps.begin(), cfg.eps.end());
        ac.dom = cfg.domain;
        ac.xi = cfg.xi;
        // config files carry reduced rates; the discrete ansatz takes their
        // squares, matching the expansion check above
        ac.Lambda.resize(cfg.Lambda.size());
        for (std::size_t i = 0; i < cfg.Lambda.size(); ++i)
            ac.Lambda[i] = cfg.Lambda[i] * cfg.Lambda[i];
        ac.cs = cs;
        ac.h0_factor = cfg.mesh_h0_factor;
        ac.growth = cfg.mesh_growth;
        ac.validate();
        const ScaledMesh mesh = build_scaled_mesh(ac);
        const ScaledOperator sop = build_scaled_operator(ac, mesh);
        std::vector<Field> v(ac.m());
        double min_projection = 0.0;
        for (int i = 0; i < ac.m(); ++i) {
            const BubbleProjection bp = project_bubble(ac, sop, i);
            v[i] = bp.v;
            min_projection = std::min(min_projection, bp.min_value);
        }
        const double alpha = 0.9; // inside the admissible window (2s, 4s)
        const NonlinearSolution nn =
            solve_nonlinear_projected(ac, sop, v, alpha);
        const double t_solve = clock.lap();

        json j;
        j["psi"] = ex.psi;
        j["predicted"] = ex.predicted;
        j["extrapolated"] = ex.extrapolated;
        j["rel_error"] = ex.rel_error;
        j["eps_solved"] = ac.eps;
        j["mesh_nodes"] = mesh.size();
        j["min_projection"] = min_projection;
        j["iterations"] = nn.iterations;
        j["converged"] = nn.converged;
        j["contraction_max"] =
            nn.contraction.empty()
                ? 0.0
                : *std::max_element(nn.contraction.begin(),
                                    nn.contraction.end());
        j["correction_norm"] = nn.correction_norm;
        j["solution_norm"] = nn.full.norm_solution;
        j["max_multiplier"] = nn.full.c.cwiseAbs().maxCoeff();
        j["orth_residual"] = nn.full.orth_residual;
        write_json_file((fs::path(cfg.out_dir) / "ansatz.json").string(),
                        j.dump(), cfg.hash());

        log << "expansion: extrapolated " << format_float(ex.extrapolated)
            << " vs predicted " << format_float(ex.predicted)
            << " (rel " << format_float(ex.rel_error) << "); solve at eps = "
            << format_float(ac.eps) << (nn.converged ? " converged in "
                                                     : " NOT converged after ")
            << nn.iterations << " iterations\n";
        write_manifest(cfg, "ansatz",
                       {{"expansion", t_expansion},
                        {"solve", t_solve},
                        {"write", clock.lap()}},
                       {"expansion.csv", "ansatz.json"});
        if (!nn.converged) {
            log << "numeric failure: the projected fixed point did not "
                   "converge\n";
            return 3;
        }
        return 0;
    });
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& log) {
    return run_guarded(cfg, log, [&]() -> int {
        ensure_dir(cfg.out_dir);
        const std::string own = cfg.hash();

        // refuse to mix runs: every hash already present must match this
        // config's hash
        std::map<std::string, std::string> foreign;
        for (const auto& entry : fs::directory_iterator(cfg.out_dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string h = read_file_hash(entry.path().string());
            if (!h.empty() && h != own)
                foreign[entry.path().filename().string()] = h;
        }
        if (!foreign.empty()) {
            log << "config error: output directory holds files from a "
                   "different config (own hash "
                << own << "):\n";
            for (const auto& [name, h] : foreign)
                log << "  " << name << " carries " << h << "\n";
            return 2;
        }

        PhaseClock clock;
        std::vector<CriterionResult> results;
        const std::string path =
            (fs::path(cfg.out_dir) / "acceptance.json").string();
        const auto flush = [&]() {
            json j;
            j["all_passed"] = all_passed(results);
            json arr = json::array();
            for (const CriterionResult& r : results)
                arr.push_back({{"id", r.id},
                               {"name", r.name},
                               {"pass", r.pass},
                               {"measured", r.measured},
                               {"detail", r.detail},
                               {"seconds", r.seconds}});
            j["criteria"] = arr;
            write_json_file(path, j.dump(), own);
        };

        AcceptanceOptions opt;
        opt.on_result = [&](const CriterionResult& r) {
            results.push_back(r);
            flush();
            log << format_criterion_line(r) << "\n" << std::flush;
        };
        run_acceptance(opt);
        const bool ok = all_passed(results);
        log << (ok ? "acceptance: all criteria passed\n"
                   : "acceptance: criteria FAILED\n");
        write_manifest(cfg, "verify", {{"acceptance", clock.lap()}},
                       {"acceptance.json"});
        return ok ? 0 : 4;
    });
}

int run_command(const std::string& name, const ExperimentConfig& cfg,
                std::ostream& log) {
    if (name == "constants") return cmd_constants(cfg, log);
    if (name == "green") return cmd_green(cfg, log);
    if (name == "robin") return cmd_robin(cfg, log);
    if (name == "psi_scan") return cmd_psi_scan(cfg, log);
    if (name == "find_critical") return cmd_find_critical(cfg, log);
    if (name == "ansatz") return cmd_ansatz(cfg, log);
    if (name == "verify") return cmd_verify(cfg, log);
    throw std::invalid_argument("unknown command: " + name);
}

} // namespace fracbubble
