#ifndef UAVMEC_MODEL_HPP
#define UAVMEC_MODEL_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

// Problem data for the UAV-aided MEC offloading instance and the closed-form
// physical quantities built on it: LoS channel gain, spectral uploading rate,
// offloaded bits, flight and computation energy, and a full constraint audit.
//
// Unit convention: everything is SI linear (meters, seconds, watts, joules,
// hertz, bits). dB-valued inputs are converted once at ingestion, never here.

namespace uavmec {

using Vec2 = Eigen::Vector2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using MatXi = Eigen::MatrixXi;

// Relative feasibility tolerance: a constraint is considered satisfied when
// its signed residual is at most kFeasTol times the constraint's magnitude.
inline constexpr double kFeasTol = 1e-6;

// ---------------------------------------------------------------------------
// Instance data

struct UePoint {
  int id = 0;                      // 1-based, contiguous across the instance
  Vec2 position{0.0, 0.0};         // z_k, meters
  double min_bits = 0.0;           // D_k, QoS floor in bits
  double cycles_per_bit = 1000.0;  // C_k, CPU cycles per offloaded bit
};

struct UavParams {
  double altitude = 50.0;    // H, meters (fixed flight altitude)
  double weight = 10.0;      // M, kg
  double v_max = 30.0;       // m/s
  double battery = 3.6e5;    // E_0, joules
  double cpu_freq = 2e9;     // f_C, Hz
  double switch_cap = 1e-27; // gamma_C, effective switched capacitance
  Vec2 start_point{0.0, 0.0}; // q_0 (departure, origin by default)
  Vec2 end_point{0.0, 0.0};   // q_T (preset landing point)
};

struct ChannelParams {
  double ref_gain = 1e-5;     // rho_0, linear power gain at 1 m
  double noise_power = 1e-14; // sigma^2, watts
  double bandwidth = 1e7;     // B, Hz
};

struct TimeGrid {
  double horizon = 120.0; // T, seconds
  int slots = 50;         // N

  double slot_len() const { return horizon / static_cast<double>(slots); }
};

struct UeBudget {
  double energy_cap = 36.0; // E_U, joules of uploading energy per UE
  double p_min = 0.1;       // P_min, watts
};

struct Scenario {
  std::vector<UePoint> ues;
  UavParams uav;
  ChannelParams channel;
  TimeGrid time;
  UeBudget budget;
  std::uint64_t seed = 0;

  int K() const { return static_cast<int>(ues.size()); }
  int N() const { return time.slots; }

  // kappa = 0.5 * M * delta_t, the per-slot flight-energy coefficient.
  double flight_kappa() const { return 0.5 * uav.weight * time.slot_len(); }

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Decision data

// UAV waypoints q[0..N]; q[0] is the departure point, q[N] the landing point.
// The serving position of (1-based) slot n is q[n], the end of flight step
// n-1 -> n. Step speeds are ||q[n+1]-q[n]|| / delta_t for n = 0..N-1.
struct Trajectory {
  std::vector<Vec2> points;

  int steps() const { return static_cast<int>(points.size()) - 1; }
  const Vec2& serving_position(int slot0) const { return points[slot0 + 1]; }
  double step_speed(int n, const TimeGrid& grid) const {
    return (points[n + 1] - points[n]).norm() / grid.slot_len();
  }
};

// Binary K x N user-association matrix; each column (slot) sums to one.
struct Association {
  MatXi b;

  int K() const { return static_cast<int>(b.rows()); }
  int N() const { return static_cast<int>(b.cols()); }

  // 0-based index of the UE served in slot n, or -1 if the column is not a
  // unit column.
  int served_ue(int n) const {
    int found = -1;
    for (int k = 0; k < b.rows(); ++k) {
      if (b(k, n) == 1) {
        if (found >= 0) return -1;
        found = k;
      } else if (b(k, n) != 0) {
        return -1;
      }
    }
    return found;
  }
};

// Uploading powers p_k[n] in watts, K x N.
struct PowerSchedule {
  MatX p;
};

struct EnergyLedger {
  double flight = 0.0;  // E_F
  double compute = 0.0; // E_C
  VecX per_slot_flight; // e_F[n], length N
  VecX per_ue_compute;  // e_k, length K

  double total() const { return flight + compute; }
};

// ---------------------------------------------------------------------------
// Closed-form quantities

// LoS channel gain rho_0 / (H^2 + ||q - z||^2).
inline double channel_gain(const Vec2& q, const Vec2& z,
                           const ChannelParams& ch, const UavParams& uav) {
  const double horiz2 = (q - z).squaredNorm();
  return ch.ref_gain / (uav.altitude * uav.altitude + horiz2);
}

// Spectral uploading rate log2(1 + p * gain / sigma^2) in bits/s/Hz.
inline double rate(double p_watts, double gain, double noise_power) {
  return std::log2(1.0 + p_watts * gain / noise_power);
}

// K x N matrix of per-slot rates at the trajectory's serving positions.
inline MatX slot_rates(const Scenario& scen, const Trajectory& traj,
                       const PowerSchedule& power) {
  const int K = scen.K(), N = scen.N();
  MatX R(K, N);
  for (int n = 0; n < N; ++n) {
    const Vec2& q = traj.serving_position(n);
    for (int k = 0; k < K; ++k) {
      const double g = channel_gain(q, scen.ues[k].position, scen.channel, scen.uav);
      R(k, n) = rate(power.p(k, n), g, scen.channel.noise_power);
    }
  }
  return R;
}

struct BitsResult {
  VecX per_ue;  // S_k
  double total; // S-hat
};

// S_k = delta_t * B * sum_n b_k[n] R_k[n]; slot-major accumulation order is
// the canonical one shared with the association solver.
inline BitsResult offloaded_bits(const Association& assoc, const MatX& rates,
                                 const TimeGrid& grid, double bandwidth) {
  const int K = assoc.K(), N = assoc.N();
  if (rates.rows() != K || rates.cols() != N)
    throw std::invalid_argument("offloaded_bits: rate matrix shape mismatch");
  BitsResult out;
  out.per_ue = VecX::Zero(K);
  for (int k = 0; k < K; ++k) {
    double acc = 0.0;
    for (int n = 0; n < N; ++n)
      if (assoc.b(k, n) != 0) acc += rates(k, n);
    out.per_ue[k] = acc * grid.slot_len() * bandwidth;
  }
  out.total = 0.0;
  for (int k = 0; k < K; ++k) out.total += out.per_ue[k];
  return out;
}

inline BitsResult bits_of(const Scenario& scen, const Trajectory& traj,
                          const Association& assoc, const PowerSchedule& power) {
  return offloaded_bits(assoc, slot_rates(scen, traj, power), scen.time,
                        scen.channel.bandwidth);
}

struct FlightEnergy {
  VecX per_slot; // e_F[n] = kappa * nu[n]^2
  double total;  // E_F
};

inline FlightEnergy flight_energy(const Trajectory& traj, const Scenario& scen) {
  const int N = scen.N();
  if (traj.steps() != N)
    throw std::invalid_argument("flight_energy: trajectory has wrong length");
  const double dt = scen.time.slot_len();
  const double kappa = scen.flight_kappa();
  FlightEnergy out;
  out.per_slot = VecX::Zero(N);
  out.total = 0.0;
  for (int n = 0; n < N; ++n) {
    const double v = (traj.points[n + 1] - traj.points[n]).norm() / dt;
    out.per_slot[n] = kappa * v * v;
    out.total += out.per_slot[n];
  }
  return out;
}

struct ComputeEnergy {
  VecX per_ue; // e_k = gamma_C * C_k * S_k * f_C^2
  double total;
};

inline ComputeEnergy compute_energy(const VecX& bits_per_ue,
                                    const std::vector<UePoint>& ues,
                                    const UavParams& uav) {
  const int K = static_cast<int>(ues.size());
  if (bits_per_ue.size() != K)
    throw std::invalid_argument("compute_energy: bits vector shape mismatch");
  ComputeEnergy out;
  out.per_ue = VecX::Zero(K);
  out.total = 0.0;
  const double f2 = uav.cpu_freq * uav.cpu_freq;
  for (int k = 0; k < K; ++k) {
    out.per_ue[k] = uav.switch_cap * ues[k].cycles_per_bit * bits_per_ue[k] * f2;
    out.total += out.per_ue[k];
  }
  return out;
}

inline EnergyLedger energy_ledger(const Scenario& scen, const Trajectory& traj,
                                  const Association& assoc,
                                  const PowerSchedule& power) {
  const FlightEnergy ef = flight_energy(traj, scen);
  const BitsResult bits = bits_of(scen, traj, assoc, power);
  const ComputeEnergy ec = compute_energy(bits.per_ue, scen.ues, scen.uav);
  EnergyLedger ledger;
  ledger.flight = ef.total;
  ledger.compute = ec.total;
  ledger.per_slot_flight = ef.per_slot;
  ledger.per_ue_compute = ec.per_ue;
  return ledger;
}

// ---------------------------------------------------------------------------
// Constraint audit

struct AuditItem {
  std::string family; // velocity, association, power_floor, power_budget,
                      // qos, energy, endpoint
  int ue = -1;        // 0-based where applicable
  int slot = -1;
  double residual = 0.0; // signed; <= 0 means satisfied
  double scale = 1.0;    // magnitude used for the relative tolerance

  double scaled() const { return residual / scale; }
};

struct AuditReport {
  std::vector<AuditItem> items;

  double worst_scaled() const {
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& it : items) w = std::max(w, it.scaled());
    return w;
  }
  bool feasible(double tol = kFeasTol) const { return worst_scaled() <= tol; }
  double family_max(const std::string& family) const {
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& it : items)
      if (it.family == family) w = std::max(w, it.scaled());
    return w;
  }
};

// Signed residuals for every constraint of the joint problem at the given
// candidate solution. Shapes inconsistent with the scenario are an instance
// error and throw.
inline AuditReport audit(const Scenario& scen, const Trajectory& traj,
                         const Association& assoc, const PowerSchedule& power) {
  const int K = scen.K(), N = scen.N();
  if (traj.steps() != N) throw std::invalid_argument("audit: trajectory length");
  if (assoc.K() != K || assoc.N() != N)
    throw std::invalid_argument("audit: association shape");
  if (power.p.rows() != K || power.p.cols() != N)
    throw std::invalid_argument("audit: power shape");

  AuditReport rep;
  const double dt = scen.time.slot_len();
  const double step_cap = scen.uav.v_max * dt;

  // Velocity (per flight step), residual in meters of distance overshoot.
  for (int n = 0; n < N; ++n) {
    const double d = (traj.points[n + 1] - traj.points[n]).norm();
    rep.items.push_back({"velocity", -1, n, d - step_cap, step_cap});
  }

  // Endpoints.
  const double end_scale = 1.0 + scen.uav.end_point.norm();
  rep.items.push_back({"endpoint", -1, 0,
                       (traj.points.front() - scen.uav.start_point).norm(),
                       1.0 + scen.uav.start_point.norm()});
  rep.items.push_back({"endpoint", -1, N,
                       (traj.points.back() - scen.uav.end_point).norm(),
                       end_scale});

  // Association: binary entries and unit column sums.
  for (int n = 0; n < N; ++n) {
    int colsum = 0;
    bool binary = true;
    for (int k = 0; k < K; ++k) {
      const int v = assoc.b(k, n);
      if (v != 0 && v != 1) binary = false;
      colsum += v;
    }
    const double resid = binary ? std::abs(static_cast<double>(colsum) - 1.0) : 1.0;
    rep.items.push_back({"association", -1, n, resid, 1.0});
  }

  // Power floor and per-UE uploading-energy budget.
  for (int k = 0; k < K; ++k) {
    double used = 0.0;
    for (int n = 0; n < N; ++n) {
      rep.items.push_back({"power_floor", k, n,
                           scen.budget.p_min - power.p(k, n),
                           std::max(scen.budget.p_min, 1e-12)});
      used += power.p(k, n);
    }
    rep.items.push_back({"power_budget", k, -1, used * dt - scen.budget.energy_cap,
                         std::max(scen.budget.energy_cap, 1e-12)});
  }

  // QoS and battery energy.
  const BitsResult bits = bits_of(scen, traj, assoc, power);
  const double bits_scale = dt * scen.channel.bandwidth;
  for (int k = 0; k < K; ++k) {
    rep.items.push_back({"qos", k, -1, scen.ues[k].min_bits - bits.per_ue[k],
                         std::max(scen.ues[k].min_bits, bits_scale)});
  }
  const EnergyLedger ledger = energy_ledger(scen, traj, assoc, power);
  rep.items.push_back({"energy", -1, -1, ledger.total() - scen.uav.battery,
                       scen.uav.battery});
  return rep;
}

// ---------------------------------------------------------------------------

inline void Scenario::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw std::invalid_argument(key + ": " + what);
  };
  if (ues.empty()) fail("ues", "at least one UE required");
  for (int k = 0; k < K(); ++k) {
    const auto& ue = ues[k];
    if (ue.id != k + 1) fail("ues[" + std::to_string(k) + "].id",
                             "ids must be contiguous starting at 1");
    if (ue.min_bits < 0) fail("ues[" + std::to_string(k) + "].min_bits",
                              "must be >= 0");
    if (!(ue.cycles_per_bit > 0))
      fail("ues[" + std::to_string(k) + "].cycles_per_bit", "must be > 0");
  }
  if (!(uav.altitude > 0)) fail("uav.altitude", "must be > 0");
  if (!(uav.weight > 0)) fail("uav.weight", "must be > 0");
  if (!(uav.v_max > 0)) fail("uav.v_max", "must be > 0");
  if (!(uav.battery > 0)) fail("uav.battery_J", "must be > 0");
  if (!(uav.cpu_freq > 0)) fail("uav.cpu_freq_hz", "must be > 0");
  if (!(uav.switch_cap > 0)) fail("uav.switch_cap", "must be > 0");
  if (!(channel.ref_gain > 0)) fail("channel.ref_gain_db", "linear gain must be > 0");
  if (!(channel.noise_power > 0)) fail("channel.noise_power_db", "noise power must be > 0");
  if (!(channel.bandwidth > 0)) fail("channel.bandwidth_hz", "must be > 0");
  if (!(time.horizon > 0)) fail("time.horizon_s", "must be > 0");
  if (time.slots < 1) fail("time.slots", "must be >= 1");
  if (!(budget.p_min >= 0)) fail("budget.p_min_w", "must be >= 0");
  // E_U >= N * delta_t * P_min, otherwise (5) and (6) cannot both hold.
  const double floor_energy = time.slots * time.slot_len() * budget.p_min;
  if (budget.energy_cap < floor_energy * (1.0 - 1e-12))
    fail("budget.energy_cap_J", "below N*delta_t*p_min; power floor infeasible");
  // Without this no trajectory can join the endpoints at all.
  if ((uav.end_point - uav.start_point).norm() > uav.v_max * time.horizon * (1.0 + 1e-12))
    fail("uav.end_point", "farther than v_max*horizon from start_point");
}

} // namespace uavmec

#endif // UAVMEC_MODEL_HPP
