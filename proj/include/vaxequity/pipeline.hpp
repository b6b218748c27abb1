#pragma once

#include "vaxequity/allocator.hpp"
#include "vaxequity/config.hpp"
#include "vaxequity/regression.hpp"
#include "vaxequity/risk_metrics.hpp"

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

/// The five CLI commands as library calls. Every command reads its inputs
/// from files and writes its artifacts under RunConfig::output_dir:
///
///   ingest    panels/<country_id>.csv, ingest_summary.json
///   train     model.json (or model_path), metrics.csv, train_report.json
///   allocate  allocation.csv, allocation_report.json
///   sweep     sweep.csv
namespace vaxequity::pipeline {

inline constexpr const char *kPanelDir = "panels";
inline constexpr const char *kIngestSummary = "ingest_summary.json";
inline constexpr const char *kMetricsCsv = "metrics.csv";
inline constexpr const char *kTrainReport = "train_report.json";
inline constexpr const char *kAllocationCsv = "allocation.csv";
inline constexpr const char *kAllocationReport = "allocation_report.json";
inline constexpr const char *kSweepCsv = "sweep.csv";

/// Panels and static attributes as persisted by ingest.
struct PanelSet {
    std::vector<risk::RiskPanel> panels;
    std::map<std::string, ingest::CountryStatic> attrs;
};

struct IngestOutcome {
    std::size_t countries = 0;
    std::vector<std::string> skipped; // "<id>: reason"
};

struct TrainOutcome {
    std::vector<regression::RiskModelFit> fits;
    std::vector<std::string> failures; // "<id>: reason"
};

struct AllocateOutcome {
    alloc::AllocationProblem problem;
    alloc::AllocationResult result;
    std::vector<std::string> warnings;
};

IngestOutcome run_ingest(const RunConfig &cfg, std::ostream &log);

/// Reads ingest_summary.json and every panel it lists.
PanelSet load_panels(const RunConfig &cfg);

/// Throws RankError if no country could be fit.
TrainOutcome run_train(const RunConfig &cfg, std::ostream &log);

/// Builds the allocation problem for cfg.allocation_date.
///
/// Risk stays in the normalized units the models were fit in. The vaccination
/// coefficient is converted to raw population fractions so that the box
/// [v_prev, 1] and dose counts are physical:
///   beta2_raw = beta2 / (vmax - vmin),  beta0_tilde -= beta2_raw * vmin.
/// A country whose vaccination rate never moved in the window gets
/// beta2_raw = 0. v_prev is the raw rate on the day before the allocation
/// date and D_j the normalized death rate on that date; a country missing the
/// date falls back to its latest day with a warning.
alloc::AllocationProblem build_problem(const RunConfig &cfg, const PanelSet &panels,
                                       const std::vector<regression::RiskModelFit> &fits,
                                       double omega, std::vector<std::string> &warnings);

/// Solves at the first configured omega.
AllocateOutcome run_allocate(const RunConfig &cfg, std::ostream &log);

std::vector<alloc::SweepEntry> run_sweep(const RunConfig &cfg, std::ostream &log);

/// Summary text built from allocation.csv and allocation_report.json.
/// Throws IoError if either is missing.
std::string run_report(const RunConfig &cfg);

void write_allocation_csv(const std::filesystem::path &path, const alloc::AllocationProblem &p,
                          const alloc::AllocationResult &r);
void write_sweep_csv(const std::filesystem::path &path, const std::vector<alloc::SweepEntry> &entries);

} // namespace vaxequity::pipeline
