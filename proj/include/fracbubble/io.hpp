#pragma once

// Experiment configs, hash-stamped outputs, and the subcommand bodies behind
// the command-line tool.
//
// Configs are flat key = value text, one key per line, grouped by module
// prefix (scan.*, mesh.*, green.*); '#' starts a comment. Unknown keys are
// rejected at parse time, and validate() checks every precondition of the
// modules a command can reach, so a config that parses cleanly will not be
// refused later for a reason that was visible in the file.
//
// Every data file a command emits carries the config hash: JSON outputs as a
// "config_hash" field, tabular outputs as a '# config_hash=' comment line
// above the single header row. The hash covers exactly the keys that can
// influence numbers; the output directory and the thread count are excluded,
// so moving a run or changing parallelism cannot disguise one experiment as
// another. Identical config and seed reproduce data files byte for byte; the
// run manifest also records wall-clock timings and is the one file exempt
// from that guarantee.

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "fracbubble/constants.hpp"
#include "fracbubble/domain.hpp"
#include "fracbubble/green.hpp"
#include "fracbubble/operators.hpp"
#include "fracbubble/params.hpp"

namespace fracbubble {

inline constexpr const char* kVersion = "1.0.0";
// Cache directory override; unset means "no cache, rebuild everything".
inline constexpr const char* kCacheEnvVar = "FRACBUBBLE_CACHE_DIR";

struct ExperimentConfig {
    // problem
    FracParams p;
    Criticality crit = Criticality::subcritical;
    OpKind op_kind = OpKind::spectral;
    DomainSpec domain;                 // interval (-1, 1) by default

    // perturbation ladder and bubble count
    std::vector<double> eps{0.02};
    int m = 1;

    // explicit seeds; empty means "derive seeds from the scan ranges"
    std::vector<Point> xi;
    std::vector<double> Lambda;

    // scan ranges, one axis per xi coordinate and one per rate
    double scan_xi_lo = -0.7, scan_xi_hi = 0.7;
    int scan_xi_cells = 15;
    double scan_lambda_lo = 0.6, scan_lambda_hi = 3.0;
    int scan_lambda_cells = 7;

    // discretization
    int grid_cells = 256;
    int green_samples = 7;
    double mesh_h0_factor = 1.0 / 64.0;
    double mesh_growth = 1.12;

    // control
    double tol = 1e-10;
    unsigned seed = 7;
    int threads = 0;                   // 0 = leave the runtime default
    std::string out_dir = "out";

    // Throws std::invalid_argument naming the violated invariant.
    void validate() const;

    // Key = value lines in fixed key order, floats at 17 significant digits;
    // the text hashed below and embedded in every run manifest.
    std::string canonical() const;
    // FNV-1a (64-bit) of canonical(), as 16 hex digits.
    std::string hash() const;
};

// Parse with unknown-key rejection; both throw std::invalid_argument.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Command-line values that take precedence over the file.
struct CliOverrides {
    std::optional<std::string> out;
    std::optional<int> threads;
    std::optional<double> tol;
    std::optional<unsigned> seed;
};
void apply_overrides(ExperimentConfig& cfg, const CliOverrides& o);

// ---------------------------------------------------------------------------
// formatting and files

// Shortest-width %.17g rendering; used for every float in tabular output.
std::string format_float(double v);

// Tabular writer: '# config_hash=<hex>' line, one header row, then data rows.
// Flushes after every row so partial results survive a failure.
class TableWriter {
  public:
    TableWriter(const std::string& path, const std::string& config_hash,
                const std::vector<std::string>& columns);
    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& cells);

  private:
    std::ofstream out_;
    std::size_t width_;
};

// Serialize with sorted keys and a "config_hash" field injected at the top
// level; parents are created as needed.
void write_json_file(const std::string& path, const std::string& json_text,
                     const std::string& config_hash);

// First config hash found in the file: the "config_hash" field of a JSON
// document or the '# config_hash=' comment of a table; empty if absent.
std::string read_file_hash(const std::string& path);

// $FRACBUBBLE_CACHE_DIR, or empty when unset.
std::string cache_directory();

// Green table memoization keyed by operator + samples. With no cache
// directory this is build_green_table; otherwise a hit skips the solves and
// a miss stores them after building.
GreenTable load_or_build_green_table(const DiscreteOperator& op,
                                     const std::vector<Point>& samples,
                                     const ConstantSet& cs);

// ---------------------------------------------------------------------------
// commands
//
// Each returns a process exit code: 0 ok, 2 config error, 3 numeric failure,
// 4 acceptance failure. Outputs land in cfg.out_dir next to a per-command
// run manifest (config hash, versions, timings, emitted files). Partial
// results are flushed before any failure return.

int cmd_constants(const ExperimentConfig& cfg, std::ostream& log);
int cmd_green(const ExperimentConfig& cfg, std::ostream& log);
int cmd_robin(const ExperimentConfig& cfg, std::ostream& log);
int cmd_psi_scan(const ExperimentConfig& cfg, std::ostream& log);
int cmd_find_critical(const ExperimentConfig& cfg, std::ostream& log);
int cmd_ansatz(const ExperimentConfig& cfg, std::ostream& log);
// Refuses an output directory holding files from a different config (mixed
// hashes, exit 2), then runs the acceptance suite: exit 0 iff every
// criterion passes, 4 otherwise.
int cmd_verify(const ExperimentConfig& cfg, std::ostream& log);

// Name-based dispatch used by the CLI; throws std::invalid_argument for an
// unknown command name.
int run_command(const std::string& name, const ExperimentConfig& cfg,
                std::ostream& log);

} // namespace fracbubble
