#include "edp/dataset.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "edp/errors.hpp"

namespace edp {

namespace {

constexpr char kMagic[4] = {'E', 'D', 'P', 'D'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint32_t kFlagStats = 1u;

Vector to_float_precision(Vector v) {
  round_to_float(v);
  return v;
}

}  // namespace

Matrix StateNormalizer::apply(const Matrix& s) const {
  if (s.rows() != mean.size()) throw ShapeError("normalizer: state dimension");
  return (s.colwise() - mean).array().colwise() / std.array();
}

OfflineDataset::OfflineDataset(int state_dim, int action_dim,
                               Eigen::MatrixXf states, Eigen::MatrixXf actions,
                               Eigen::RowVectorXf rewards,
                               Eigen::MatrixXf next_states,
                               Eigen::RowVectorXf dones,
                               std::optional<StateNormalizer> normalizer)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      states_(std::move(states)),
      actions_(std::move(actions)),
      next_states_(std::move(next_states)),
      rewards_(std::move(rewards)),
      dones_(std::move(dones)),
      normalizer_(std::move(normalizer)) {
  if (state_dim < 1 || action_dim < 1) {
    throw ParameterError("dataset dimensions must be positive");
  }
  const Index n = states_.cols();
  if (n < 1) throw ParameterError("dataset must be nonempty");
  if (states_.rows() != state_dim || next_states_.rows() != state_dim ||
      actions_.rows() != action_dim || actions_.cols() != n ||
      next_states_.cols() != n || rewards_.size() != n || dones_.size() != n) {
    throw ShapeError("dataset arrays have inconsistent shapes");
  }
  if (!states_.allFinite() || !actions_.allFinite() || !rewards_.allFinite() ||
      !next_states_.allFinite() || !dones_.allFinite()) {
    throw NumericError("dataset contains non-finite values");
  }
  if (normalizer_ && (normalizer_->mean.size() != state_dim ||
                      normalizer_->std.size() != state_dim)) {
    throw ShapeError("normalizer dimension differs from state_dim");
  }
}

TransitionBatch OfflineDataset::batch(std::span<const Index> indices) const {
  const auto b = static_cast<Index>(indices.size());
  TransitionBatch out;
  out.s.resize(state_dim_, b);
  out.a.resize(action_dim_, b);
  out.r.resize(b);
  out.s_next.resize(state_dim_, b);
  out.done.resize(b);
  for (Index j = 0; j < b; ++j) {
    const Index i = indices[static_cast<std::size_t>(j)];
    if (i < 0 || i >= size()) throw ParameterError("batch index out of range");
    out.s.col(j) = states_.col(i).cast<double>();
    out.a.col(j) = actions_.col(i).cast<double>();
    out.r(j) = rewards_(i);
    out.s_next.col(j) = next_states_.col(i).cast<double>();
    out.done(j) = dones_(i);
  }
  if (normalizer_) {
    out.s = normalizer_->apply(out.s);
    out.s_next = normalizer_->apply(out.s_next);
  }
  return out;
}

TransitionBatch OfflineDataset::all() const {
  std::vector<Index> idx(static_cast<std::size_t>(size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  return batch(idx);
}

bool OfflineDataset::operator==(const OfflineDataset& o) const {
  return state_dim_ == o.state_dim_ && action_dim_ == o.action_dim_ &&
         states_ == o.states_ && actions_ == o.actions_ &&
         rewards_ == o.rewards_ && next_states_ == o.next_states_ &&
         dones_ == o.dones_ && normalizer_ == o.normalizer_;
}

BehaviorMixture parse_mixture(const std::string& spec) {
  BehaviorMixture out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0) {
      throw ParameterError("mixture entry '" + item + "' is not name:weight");
    }
    MixtureComponent c;
    c.name = item.substr(0, colon);
    try {
      std::size_t used = 0;
      const std::string w = item.substr(colon + 1);
      c.weight = std::stod(w, &used);
      if (used != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception&) {
      throw ParameterError("mixture weight in '" + item + "' is not a number");
    }
    out.push_back(c);
  }
  if (out.empty()) throw ParameterError("empty mixture");
  return out;
}

std::string format_mixture(const BehaviorMixture& mixture) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < mixture.size(); ++i) {
    if (i) os << ',';
    os << mixture[i].name << ':' << mixture[i].weight;
  }
  return os.str();
}

BehaviorMixture default_mixture(EnvKind kind) {
  if (kind == EnvKind::kBimodalBandit) {
    return {{"mode0", 0.475}, {"mode1", 0.475}, {"uniform", 0.05}};
  }
  return {{"expert", 0.2}, {"noisy", 0.5}, {"uniform", 0.3}};
}

namespace {

enum class Behavior { kMode0, kMode1, kUniform, kExpert, kNoisy };

Behavior behavior_from_name(const std::string& name, EnvKind kind) {
  if (name == "uniform") return Behavior::kUniform;
  if (kind == EnvKind::kBimodalBandit) {
    if (name == "mode0") return Behavior::kMode0;
    if (name == "mode1") return Behavior::kMode1;
  } else {
    if (name == "expert") return Behavior::kExpert;
    if (name == "noisy") return Behavior::kNoisy;
  }
  throw ParameterError("mixture component '" + name + "' is not valid for " +
                       std::string(to_string(kind)));
}

Vector uniform_action(const SyntheticEnv& env, Rng& rng) {
  std::uniform_real_distribution<double> u(-env.action_bound(),
                                           env.action_bound());
  Vector a(env.action_dim());
  for (Index i = 0; i < a.size(); ++i) a(i) = u(rng);
  return a;
}

Vector behave(const SyntheticEnv& env, Behavior b, const Vector& s,
              const MixtureParams& p, Rng& rng) {
  const double bound = env.action_bound();
  auto clip = [bound](const Vector& a) {
    return Vector(a.cwiseMax(-bound).cwiseMin(bound));
  };
  switch (b) {
    case Behavior::kUniform:
      return uniform_action(env, rng);
    case Behavior::kMode0:
    case Behavior::kMode1:
      return clip(env.mode(b == Behavior::kMode0 ? 0 : 1) +
                  p.mode_std * standard_normal(env.action_dim(), rng));
    case Behavior::kExpert:
      return clip(env.expert_action(s) +
                  p.expert_noise * standard_normal(env.action_dim(), rng));
    case Behavior::kNoisy: {
      std::bernoulli_distribution explore(p.noisy_epsilon);
      if (explore(rng)) return uniform_action(env, rng);
      return clip(env.expert_action(s) +
                  p.noisy_noise * standard_normal(env.action_dim(), rng));
    }
  }
  return uniform_action(env, rng);
}

}  // namespace

OfflineDataset generate_dataset(const SyntheticEnv& env,
                                const BehaviorMixture& mixture, Index n,
                                std::uint64_t seed,
                                const MixtureParams& params) {
  if (n < 1) throw ParameterError("dataset size must be >= 1");
  std::vector<Behavior> behaviors;
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& c : mixture) {
    if (!(c.weight >= 0.0)) throw ParameterError("negative mixture weight");
    behaviors.push_back(behavior_from_name(c.name, env.kind()));
    weights.push_back(c.weight);
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ParameterError("mixture weights must sum to 1 (got " +
                         std::to_string(total) + ")");
  }
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

  const int ds = env.state_dim();
  const int da = env.action_dim();
  Eigen::MatrixXf S(ds, n), A(da, n), S2(ds, n);
  Eigen::RowVectorXf R(n), D(n);

  Index i = 0;
  while (i < n) {
    // One behavior per episode.
    const Behavior b = behaviors[pick(rng)];
    Vector s = env.reset(rng);
    for (int t = 0; t < env.episode_len() && i < n; ++t, ++i) {
      const Vector a = behave(env, b, s, params, rng);
      const StepResult res = env.step(s, a, t, rng);
      S.col(i) = s.cast<float>();
      A.col(i) = a.cast<float>();
      R(i) = static_cast<float>(res.r);
      S2.col(i) = res.s_next.cast<float>();
      D(i) = res.done ? 1.0f : 0.0f;
      s = res.s_next;
      if (res.done) {
        ++i;
        break;
      }
    }
  }
  return OfflineDataset(ds, da, std::move(S), std::move(A), std::move(R),
                        std::move(S2), std::move(D));
}

void save_dataset(const OfflineDataset& ds, const std::string& path) {
  detail::ByteWriter w;
  w.bytes(kMagic, 4);
  w.uint(kVersion);
  w.uint(static_cast<std::uint32_t>(ds.state_dim()));
  w.uint(static_cast<std::uint32_t>(ds.action_dim()));
  w.uint(static_cast<std::uint64_t>(ds.size()));
  w.uint(ds.normalizer() ? kFlagStats : 0u);
  if (ds.normalizer()) {
    for (Index i = 0; i < ds.state_dim(); ++i) w.f32(ds.normalizer()->mean(i));
    for (Index i = 0; i < ds.state_dim(); ++i) w.f32(ds.normalizer()->std(i));
  }
  for (Index j = 0; j < ds.size(); ++j) {
    for (Index i = 0; i < ds.state_dim(); ++i) w.f32(ds.states()(i, j));
    for (Index i = 0; i < ds.action_dim(); ++i) w.f32(ds.actions()(i, j));
    w.f32(ds.rewards()(j));
    for (Index i = 0; i < ds.state_dim(); ++i) w.f32(ds.next_states()(i, j));
    w.f32(ds.dones()(j));
  }
  detail::write_file_atomic(path, w.data());
}

OfflineDataset load_dataset(const std::string& path) {
  const std::vector<unsigned char> buf = detail::read_file(path);
  detail::ByteReader r(buf, "dataset '" + path + "'");
  if (r.raw(4, "magic") != std::string(kMagic, 4)) r.fail("bad magic", 0);
  const std::size_t version_at = r.offset();
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kVersion) {
    r.fail("unsupported version " + std::to_string(version), version_at);
  }
  const auto ds = r.uint<std::uint32_t>("state_dim");
  const auto da = r.uint<std::uint32_t>("action_dim");
  const std::size_t count_at = r.offset();
  const auto count = r.uint<std::uint64_t>("count");
  const std::size_t flags_at = r.offset();
  const auto flags = r.uint<std::uint32_t>("flags");
  if (ds == 0 || da == 0) r.fail("zero dimension in header", count_at - 8);
  if (count == 0) r.fail("empty dataset", count_at);
  if (flags & ~kFlagStats) r.fail("unknown flag bits", flags_at);

  std::optional<StateNormalizer> norm;
  if (flags & kFlagStats) {
    r.need(8ull * ds, "normalization stats");
    StateNormalizer n{Vector(ds), Vector(ds)};
    for (Index i = 0; i < ds; ++i) n.mean(i) = r.f32("stats");
    for (Index i = 0; i < ds; ++i) n.std(i) = r.f32("stats");
    norm = std::move(n);
  }
  const std::uint64_t record = 2ull * ds + da + 2;
  if (r.remaining() / 4 / record < count) {
    r.need(record * 4 * count, "transition records");
  }
  if (r.remaining() != record * 4 * count) {
    r.fail("trailing bytes after records", r.offset() + record * 4 * count);
  }
  const auto n = static_cast<Index>(count);
  Eigen::MatrixXf S(ds, n), A(da, n), S2(ds, n);
  Eigen::RowVectorXf R(n), D(n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < ds; ++i) S(i, j) = static_cast<float>(r.f32("record"));
    for (Index i = 0; i < da; ++i) A(i, j) = static_cast<float>(r.f32("record"));
    R(j) = static_cast<float>(r.f32("record"));
    for (Index i = 0; i < ds; ++i) S2(i, j) = static_cast<float>(r.f32("record"));
    const std::size_t done_at = r.offset();
    D(j) = static_cast<float>(r.f32("record"));
    if (D(j) != 0.0f && D(j) != 1.0f) r.fail("done flag is not 0 or 1", done_at);
  }
  try {
    return OfflineDataset(static_cast<int>(ds), static_cast<int>(da),
                          std::move(S), std::move(A), std::move(R),
                          std::move(S2), std::move(D), std::move(norm));
  } catch (const NumericError& e) {
    throw FormatError(std::string("dataset '") + path + "': " + e.what(),
                      flags_at + 4);
  }
}

OfflineDataset normalize_states(const OfflineDataset& ds) {
  const Eigen::MatrixXd s = ds.states().cast<double>();
  const Vector mean = s.rowwise().mean();
  const Vector var =
      (s.colwise() - mean).array().square().rowwise().mean().matrix();
  StateNormalizer norm{to_float_precision(mean),
                       to_float_precision(var.cwiseSqrt().cwiseMax(1e-3))};
  return OfflineDataset(ds.state_dim(), ds.action_dim(), ds.states(),
                        ds.actions(), ds.rewards(), ds.next_states(),
                        ds.dones(), std::move(norm));
}

}  // namespace edp
