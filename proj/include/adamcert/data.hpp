#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adamcert/errors.hpp"
#include "adamcert/philox.hpp"

namespace adamcert {

enum class dist_kind { uniform_box, two_point, finite_atoms, point_mass };

/// I.i.d. data stream on the box [-p_box, p_box]^dim_data.
///
/// Sampling is stateless: the sample at index (stream id t, step n, batch
/// index m) is a pure function of (seed, t, n, m). Uniform draw j of a sample
/// uses philox_u53(seed, t, n, m, j); see philox.hpp for the exact counter
/// layout. uniform_box consumes draws j = 0..dim_data-1 (coordinate j mapped
/// to p_box * (2u - 1)); two_point and finite_atoms consume the single
/// selector draw j = dim_data; point_mass consumes none.
struct data_spec {
  int dim_data = 1;
  double p_box = 1.0;
  dist_kind kind = dist_kind::uniform_box;
  // two_point: atoms = {+p_box*1, -p_box*1} with equal weight (implicit).
  // finite_atoms / point_mass: explicit support below.
  std::vector<Eigen::VectorXd> atoms;
  std::vector<double> probs;
  std::uint64_t seed = 0;
};

inline void validate(const data_spec& spec) {
  if (spec.dim_data < 1) throw input_error("data.dim_data must be >= 1");
  if (!(spec.p_box > 0.0)) throw input_error("data.p_box must be > 0");
  auto check_in_box = [&](const Eigen::VectorXd& a, std::size_t idx) {
    if (a.size() != spec.dim_data)
      throw input_error("data.atoms[" + std::to_string(idx) +
                        "]: dimension mismatch");
    if (a.cwiseAbs().maxCoeff() > spec.p_box)
      throw input_error("data.atoms[" + std::to_string(idx) +
                        "]: outside the box [-p_box, p_box]");
  };
  switch (spec.kind) {
    case dist_kind::uniform_box:
    case dist_kind::two_point:
      break;
    case dist_kind::point_mass:
      if (spec.atoms.size() != 1)
        throw input_error("data.distribution: point_mass needs exactly one atom");
      check_in_box(spec.atoms[0], 0);
      break;
    case dist_kind::finite_atoms: {
      if (spec.atoms.empty())
        throw input_error("data.distribution: finite_atoms needs >= 1 atom");
      if (spec.probs.size() != spec.atoms.size())
        throw input_error("data.probs: one probability per atom required");
      double total = 0.0;
      for (std::size_t i = 0; i < spec.atoms.size(); ++i) {
        check_in_box(spec.atoms[i], i);
        if (spec.probs[i] < 0.0)
          throw input_error("data.probs[" + std::to_string(i) +
                            "]: must be >= 0");
        total += spec.probs[i];
      }
      if (std::abs(total - 1.0) > 1e-12)
        throw input_error("data.probs: must sum to 1 within 1e-12");
      break;
    }
  }
}

struct sample_stream {
  data_spec spec;
};

/// Writes the sample at (stream id t, step n, batch index m) into out.
inline void sample_into(const sample_stream& stream, std::uint32_t t,
                        std::uint32_t n, std::uint32_t m,
                        Eigen::VectorXd& out) {
  const data_spec& spec = stream.spec;
  const int dd = spec.dim_data;
  out.resize(dd);
  switch (spec.kind) {
    case dist_kind::uniform_box:
      for (int j = 0; j < dd; ++j) {
        const double u = philox_u53(spec.seed, t, n, m,
                                    static_cast<std::uint32_t>(j));
        out[j] = spec.p_box * (2.0 * u - 1.0);
      }
      break;
    case dist_kind::two_point: {
      const double u =
          philox_u53(spec.seed, t, n, m, static_cast<std::uint32_t>(dd));
      out.setConstant(u < 0.5 ? -spec.p_box : spec.p_box);
      break;
    }
    case dist_kind::point_mass:
      out = spec.atoms[0];
      break;
    case dist_kind::finite_atoms: {
      const double u =
          philox_u53(spec.seed, t, n, m, static_cast<std::uint32_t>(dd));
      double cdf = 0.0;
      std::size_t pick = spec.atoms.size() - 1;
      for (std::size_t i = 0; i < spec.atoms.size(); ++i) {
        cdf += spec.probs[i];
        if (u < cdf) {
          pick = i;
          break;
        }
      }
      out = spec.atoms[pick];
      break;
    }
  }
}

inline std::vector<Eigen::VectorXd> sample_batch(const sample_stream& stream,
                                                 std::uint32_t trajectory_id,
                                                 std::uint32_t n, int batch) {
  if (batch < 1) throw input_error("sample_batch: batch size must be >= 1");
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(batch));
  for (int m = 0; m < batch; ++m)
    sample_into(stream, trajectory_id, n, static_cast<std::uint32_t>(m),
                out[static_cast<std::size_t>(m)]);
  return out;
}

}  // namespace adamcert
