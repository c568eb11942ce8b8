#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace jjphoton::correlator {

using cplx = std::complex<double>;

// Field amplitudes are in sqrt(photons) per raw sampling interval: a
// sample y with |y|^2 = n carries n photons in that box mode.
struct ChainModel {
  std::array<double, 2> gain{1.0, 1.0};   // power gain per channel
  std::array<double, 2> noise{0.0, 0.0};  // added photons per mode, referred to input
  bool vacuum = true;                     // half a photon per mode per channel
  double cross_noise = 0.0;               // photons per mode common to both channels
  double crosstalk = 0.0;                 // raw-record leakage between digitizer channels
  std::vector<double> crosstalk_filter;   // compensation taps (at most 16), empty = off
  double f0 = 6e9;
  double f_lo = 4.5e9;
  double dt = 0.5e-9;
  double bandwidth = 1e9;                 // input band around f0, full width
  std::array<double, 5> fir{0.042, -0.338, 0.469, -0.150, 0.0};
  std::size_t block_size = 128;
  double split = 0.5;                     // power fraction sent to channel 0
  bool quantize = false;
  int adc_bits = 12;
  double adc_full_scale = 1.0;

  void validate() const;
  double intermediate_frequency() const { return f0 - f_lo; }
  double envelope_interval() const { return 2.0 * dt; }
  // Total per-channel noise variance per complex sample, before gain.
  double channel_noise(int i) const;
  // Field amplitude factor from the input to channel i.
  double split_amplitude(int i) const;
};

// Classical (P-representation) input, one complex amplitude per raw sample.
struct ClassicalInput {
  std::vector<cplx> samples;
};

// Single photons emitted into the resonator at the given times (relative to
// the first raw sample), each decaying at rate kappa. The chain renders them
// by sampling their Husimi Q function, which needs the vacuum model.
struct PhotonInput {
  std::vector<double> times;
  double kappa = 1.0 / 0.28e-9;
};

using ChainInput = std::variant<std::monostate, ClassicalInput, PhotonInput>;

struct AdcRecord {
  double dt = 0.0;
  std::array<std::vector<double>, 2> ch;
};

AdcRecord simulate_chain(const ChainInput& input, const ChainModel& chain, std::size_t n_samples,
                         std::uint64_t seed);

struct EnvelopeRecord {
  double dt = 0.0;  // 2 * chain dt
  std::size_t block_size = 0;
  std::array<std::vector<cplx>, 2> ch;
  std::vector<bool> on;  // per block

  std::size_t n_blocks() const { return block_size ? ch[0].size() / block_size : 0; }
};

// Deinterleave, FIR and sign correction. Samples before the record start are
// taken as zero. Blocks are tagged from `on` (all on when empty).
EnvelopeRecord demodulate_envelopes(const AdcRecord& adc, const ChainModel& chain,
                                    const std::vector<bool>& on = {});

// Transfer function of the envelope FIR (lowpass form) at envelope frequency f.
cplx fir_response(const ChainModel& chain, double f);

// Raw correlators at lags -(N-1)..(N-1) envelope samples:
//   cross(tau) = <S0*(t) S1(t+tau)>, auto_i(tau) = <Si*(t) Si(t+tau)>,
//   product(tau) = <P*(t) P(t+tau)> with P = S0* S1.
struct RawCorrelators {
  std::vector<double> tau;
  std::vector<cplx> cross, auto0, auto1, product;
  std::size_t n_blocks = 0;
};

// Spectral sums over blocks; finalize() turns them into correlators.
class Accumulator {
 public:
  explicit Accumulator(std::size_t block_size = 128);
  void add_block(std::span<const cplx> s0, std::span<const cplx> s1);
  void merge(const Accumulator& other);
  RawCorrelators finalize(double dt) const;
  std::size_t n_blocks() const { return n_blocks_; }
  std::size_t block_size() const { return n_; }

 private:
  std::size_t n_;
  std::size_t n_blocks_ = 0;
  std::vector<cplx> cross_, auto0_, auto1_, product_;
};

struct OnOff {
  RawCorrelators on, off;
};

OnOff correlate(const EnvelopeRecord& env);

struct CrossPair {
  std::vector<double> tau;
  std::vector<cplx> on, off;
};
CrossPair gamma1_cross(const EnvelopeRecord& env);
CrossPair gamma2_cross(const EnvelopeRecord& env);

struct CorrelationResult {
  std::vector<double> tau;
  std::vector<cplx> gamma1_cross, gamma2_cross;  // raw, on state
  std::vector<cplx> g1;                          // G1 in input photon units
  std::vector<cplx> G2;
  std::vector<double> g2;
  std::vector<double> sigma_g2;  // empty without block statistics
  std::vector<double> sigma_g1;
  std::size_t n_b = 1;
  std::size_t n_avg = 0;
  std::vector<std::string> warnings;
};

// Noise-subtracted G1, G2 and g2 from on and off correlators of a stationary
// measurement. When `precision` is positive, a warning is added if the
// expected g2 error from the off-state noise term exceeds it.
CorrelationResult assemble_g1_g2(const RawCorrelators& on, const RawCorrelators& off,
                                 std::array<double, 2> gains, double split = 0.5,
                                 double precision = 0.0);

struct BlockStats {
  std::vector<double> mean, sigma;
};
// sigma = sigma_b / sqrt(n_b - 1) with sigma_b the population deviation.
BlockStats block_statistics(const std::vector<std::vector<double>>& blocks);

// Block statistics of g2 over independently assembled groups, each group
// linearized about the pooled G2 and G1(0).
BlockStats g2_group_statistics(const std::vector<CorrelationResult>& groups);

// Streaming measurement: alternating on/off blocks, fresh input per on block.
struct ExperimentPlan {
  ChainModel chain;
  std::size_t n_groups = 16;         // n_b
  std::size_t pairs_per_group = 64;  // on/off block pairs averaged per group
  std::size_t max_lag = 32;          // envelope samples kept in the result
  std::uint64_t seed = 1;
  int threads = 1;
};

// Produces the input for one on block of n_raw samples.
using SourceFactory = std::function<ChainInput(std::uint64_t seed, std::size_t n_raw, double dt)>;

struct Experiment {
  CorrelationResult result;                // group means with block-statistics sigma
  std::vector<CorrelationResult> groups;   // per group
  RawCorrelators pooled_on, pooled_off;
};

Experiment run_experiment(const SourceFactory& source, const ExperimentPlan& plan);

// Input noise spectral density of a matched load in photons per mode,
// (1/2) coth(h f / 2 k_B T).
double load_photons(double f, double temperature);

struct CalibrationRecord {
  std::vector<double> frequency;             // bin centres, Hz (input frame)
  std::array<std::vector<double>, 2> gain;   // per channel
  std::array<std::vector<double>, 2> noise;  // photons per mode
  double t_hot = 0.0, t_cold = 0.0;
  std::vector<std::string> warnings;
};

// Loads at t_hot and t_cold are fed through `chain`; per-channel envelope PSDs
// in `bins` frequency bins give g = dS / dS_in and N = S_cold / g - S_in(cold).
CalibrationRecord calibrate(const ChainModel& chain, double t_hot, double t_cold, std::size_t bins,
                            std::size_t samples_per_bin, std::uint64_t seed);

// One measurement of a drift-compensation series.
struct DriftMeasurement {
  double time = 0.0;              // s
  double off_power = 0.0;         // off-state noise power in this measurement
  std::vector<double> tau;        // s
  std::vector<cplx> g1;           // measured G1
};

struct DriftCorrection {
  std::vector<DriftMeasurement> corrected;
  std::vector<double> gain;       // g_inst per measurement relative to the reference
  std::vector<double> phase;      // delta_i
  std::vector<double> detuning;   // Delta f_i
};

// Gain renormalized by the off noise power against `reference_noise_power`;
// phase offset and frequency fitted on the lags with |tau| <= window.
DriftCorrection drift_compensate(const std::vector<DriftMeasurement>& series,
                                 double reference_noise_power, double window = 2.05e-9);

// Binary record: 16-byte header, JSON metadata line, little-endian float32
// samples interleaved by channel.
std::string write_adc_record(const AdcRecord& rec, std::size_t block_size);
AdcRecord read_adc_record(const std::string& bytes);
std::string write_envelope_record(const EnvelopeRecord& rec);
EnvelopeRecord read_envelope_record(const std::string& bytes);

std::string correlation_to_csv(const CorrelationResult& r);

}  // namespace jjphoton::correlator
