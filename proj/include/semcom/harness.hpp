#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/config.hpp"
#include "semcom/gmm.hpp"
#include "semcom/receiver.hpp"
#include "semcom/schedule.hpp"

namespace semcom {

/// Source-mixture config keys ([source] section):
///   weights  = w1 w2 ...                       (simplex)
///   means    = m11 m12 ; m21 m22 ; ...         (';' separates components)
///   cov_diag = d11 d12 ; d21 d22 ; ...         (diagonal covariances)  -- or --
///   cov_rows = r11 r12 , r21 r22 ; ...         (full rows ','-separated)
///   labels   = 0 1 ...                         (optional class ids)
struct SourceSpec {
    std::vector<double> weights{1.0};
    std::vector<std::vector<double>> means{{0.0}};
    std::vector<std::vector<double>> cov_diag{{1.0}};      // used when cov_rows empty
    std::vector<std::vector<std::vector<double>>> cov_rows;
    std::vector<int> labels;

    GaussianMixture build() const;
};

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::VP;
    int steps = 1000;
    double beta_min = 1e-4, beta_max = 0.02;
    double sigma_min = 0.01, sigma_max = 10.0;

    NoiseSchedule build() const;
};

struct EncoderSpec {
    enum class Kind { Identity, Linear, Mlp } kind = Kind::Identity;
    int dim = 1;                                  // identity
    std::vector<std::vector<double>> rows;        // linear: m rows of D entries
    std::vector<double> bias;
    int width = 16;                               // mlp
    int out_dim = 1;
    std::uint64_t seed = 0;

    Encoder build() const;
};

struct ChannelCfg {
    ChannelKind kind = ChannelKind::Awgn;
    std::vector<double> snr_db{10.0};  // more than one entry = sweep
    int taps = 1;
    std::optional<std::vector<double>> gains;
    std::uint64_t gain_seed = 0;

    ChannelSpec build(double snr) const;
};

struct DecoderSpec {
    SamplerKind sampler = SamplerKind::ReverseSde;
    int steps = 0;
    int chains = 1;
    double gamma = 1.0;
    GammaMode gamma_mode = GammaMode::Fixed;
    double lambda = 0.0;
    bool normalize_residual = false;
    StartMode start = StartMode::Full;
    ReferenceKind reference = ReferenceKind::ConjugateMean;

    DecoderConfig build() const;
};

/// Fully resolved experiment description. Parsing is strict: unknown keys are
/// fatal, and the canonical serialization round-trips bit-identically.
struct ExperimentConfig {
    std::string experiment;
    std::vector<std::uint64_t> seeds;
    std::string out;  // empty -> derived from $SEMCOM_OUT_DIR and experiment name

    SourceSpec source;
    ScheduleSpec schedule;
    EncoderSpec encoder;
    ChannelCfg channel;
    DecoderSpec decoder;

    // experiment-specific knobs (top-level keys)
    int samples = 20000;        // sampler_fidelity, flow_transport
    int runs = 100;             // dps_conjugate, blind_gain, diffcom per-seed draws
    int train_steps = 20000;    // dsm_training
    double learning_rate = 2e-3;
    int batch_size = 128;
    int net_width = 32;
    double measurement_y = 2.0;  // dps_conjugate
    double sigma_n = 1.0;        // dps_conjugate, blind_gain
    double h_mean = 1.0, h_var = 0.1;  // blind_gain prior
    int grid_res = 50;                 // blind_gain MAP oracle
    double target_std = 2.0;           // flow_transport
    std::vector<double> steps_list{25, 50, 100, 200};  // solver_convergence
    int ref_steps = 4096;
    int points = 64;

    static ExperimentConfig from_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    std::string canonical_text() const;
    std::string resolved_out() const;
};

extern const std::vector<std::string> kExperimentNames;
bool is_experiment_name(const std::string& name);
std::string experiment_description(const std::string& name);

struct ReportTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct RunOutput {
    ReportTable data;    // deterministic per (config, seeds)
    ReportTable timing;  // wall-clock per row, written to a sidecar file
};

RunOutput run_experiment(const ExperimentConfig& cfg);

void write_csv(const std::string& path, const ReportTable& table);

}  // namespace semcom
