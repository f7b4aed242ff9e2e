#include "saup/captioner.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "saup/fsio.hpp"
#include "saup/hash.hpp"

namespace saup {

double sequence_logprob(const Captioner& model, const NormalizedTensor& z,
                        const std::vector<int>& prompt,
                        const std::vector<int>& target) {
  double sum = 0.0;
  for (double lp : model.token_logprobs(z, prompt, target)) sum += lp;
  return sum;
}

Tensor3 image_gradient(const Captioner& model, const ImageObjective& objective,
                       const NormalizedTensor& z) {
  Tensor3 g = objective.gradient(model, z);
  for (size_t i = 0; i < g.data.size(); ++i)
    if (!std::isfinite(g.data[i]))
      throw NumericalError("non-finite gradient entry " +
                           std::to_string(g.data[i]) + " at flat index " +
                           std::to_string(i));
  return g;
}

// ---------------------------------------------------------------------------
// ToyCaptioner

namespace {

constexpr int kGrid = ToyCaptioner::kInputSize / ToyCaptioner::kPatch;  // 8
constexpr double kPatchArea = ToyCaptioner::kPatch * ToyCaptioner::kPatch;

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  double m = logits.maxCoeff();
  double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal() * scale;
  return m;
}

}  // namespace

struct ToyCaptioner::States {
  Eigen::VectorXd pool;     // patch means, kPoolDim
  Eigen::VectorXd content;  // tanh branch of the encoder, kFeatureDim
  Eigen::VectorXd gate;     // sigmoid branch, kFeatureDim
  Eigen::VectorXd h;        // content .* gate, kFeatureDim
  Eigen::VectorXd q;        // prompt embedding mean, kEmbedDim
  std::vector<Eigen::VectorXd> s;         // decoder states s_1..s_N
  std::vector<Eigen::VectorXd> logits;    // per step
  std::vector<Eigen::VectorXd> logprobs;  // log-softmax per step
};

ToyCaptioner::ToyCaptioner(uint64_t seed)
    : norm_(NormalizationSpec::symmetric(kChannels, kInputSize, kInputSize)),
      init_seed_(seed) {
  Rng rng(seed);
  w_enc_ = random_matrix(rng, kFeatureDim, kPoolDim, 1.0 / std::sqrt(kPoolDim));
  b_enc_ = Eigen::VectorXd::Zero(kFeatureDim);
  w_gate_ =
      random_matrix(rng, kFeatureDim, kPoolDim, 1.0 / std::sqrt(kPoolDim));
  b_gate_ = Eigen::VectorXd::Zero(kFeatureDim);
  embed_ = random_matrix(rng, Tokenizer::kVocabSize, kEmbedDim,
                         1.0 / std::sqrt(kEmbedDim));
  w_img_ = random_matrix(rng, kFeatureDim, kFeatureDim,
                         1.0 / std::sqrt(kFeatureDim));
  w_prompt_ = random_matrix(rng, kFeatureDim, kEmbedDim,
                            1.0 / std::sqrt(kEmbedDim));
  b_state_ = Eigen::VectorXd::Zero(kFeatureDim);
  w_rec_ = random_matrix(rng, kFeatureDim, kFeatureDim,
                         1.0 / std::sqrt(kFeatureDim));
  w_tok_ = random_matrix(rng, kFeatureDim, kEmbedDim,
                         1.0 / std::sqrt(kEmbedDim));
  b_rec_ = Eigen::VectorXd::Zero(kFeatureDim);
  w_out_ = random_matrix(rng, Tokenizer::kVocabSize, kFeatureDim,
                         1.0 / std::sqrt(kFeatureDim));
  b_out_ = Eigen::VectorXd::Zero(Tokenizer::kVocabSize);
}

void ToyCaptioner::check_tokens(const std::vector<int>& ids,
                                bool allow_empty) const {
  if (!allow_empty && ids.empty())
    throw InputError("token sequence must be non-empty");
  if (ids.size() > static_cast<size_t>(kMaxSequence))
    throw InputError("token sequence length " + std::to_string(ids.size()) +
                     " overflows the limit " + std::to_string(kMaxSequence));
  for (int id : ids)
    if (id < 0 || id >= Tokenizer::kVocabSize)
      throw VocabularyError("token id " + std::to_string(id) +
                            " outside the vocabulary");
}

ToyCaptioner::States ToyCaptioner::run_forward(
    const NormalizedTensor& z, const std::vector<int>& prompt,
    const std::vector<int>& target) const {
  if (z.values.channels != kChannels || z.values.height != kInputSize ||
      z.values.width != kInputSize)
    throw DimensionError("input must be " + std::to_string(kChannels) + "x" +
                         std::to_string(kInputSize) + "x" +
                         std::to_string(kInputSize));
  check_tokens(prompt, /*allow_empty=*/true);
  check_tokens(target, /*allow_empty=*/true);

  States st;
  st.pool = Eigen::VectorXd::Zero(kPoolDim);
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < kInputSize; ++y)
      for (int x = 0; x < kInputSize; ++x)
        st.pool[(c * kGrid + y / kPatch) * kGrid + x / kPatch] +=
            z.values.at(c, y, x) / kPatchArea;

  st.content = (w_enc_ * st.pool + b_enc_).array().tanh();
  st.gate = (1.0 + (-(w_gate_ * st.pool + b_gate_).array()).exp()).inverse();
  st.h = st.content.array() * st.gate.array();

  st.q = Eigen::VectorXd::Zero(kEmbedDim);
  if (!prompt.empty()) {
    for (int id : prompt) st.q += embed_.row(id).transpose();
    st.q /= static_cast<double>(prompt.size());
  }

  size_t n = target.size();
  st.s.reserve(n);
  st.logits.reserve(n);
  st.logprobs.reserve(n);
  Eigen::VectorXd s;
  for (size_t i = 0; i < n; ++i) {
    if (i == 0)
      s = (w_img_ * st.h + w_prompt_ * st.q + b_state_).array().tanh();
    else
      s = (w_rec_ * s + w_tok_ * embed_.row(target[i - 1]).transpose() + b_rec_)
              .array()
              .tanh();
    st.s.push_back(s);
    st.logits.push_back(w_out_ * s + b_out_);
    st.logprobs.push_back(log_softmax(st.logits.back()));
  }
  return st;
}

std::vector<double> ToyCaptioner::token_logprobs(
    const NormalizedTensor& z, const std::vector<int>& prompt,
    const std::vector<int>& target) const {
  if (target.empty()) throw InputError("target must be non-empty");
  States st = run_forward(z, prompt, target);
  std::vector<double> out(target.size());
  for (size_t i = 0; i < target.size(); ++i) out[i] = st.logprobs[i][target[i]];
  return out;
}

LogprobGradient ToyCaptioner::sequence_logprob_with_gradient(
    const NormalizedTensor& z, const std::vector<int>& prompt,
    const std::vector<int>& target) const {
  if (target.empty()) throw InputError("target must be non-empty");
  States st = run_forward(z, prompt, target);
  size_t n = target.size();

  LogprobGradient out;
  for (size_t i = 0; i < n; ++i) out.logprob += st.logprobs[i][target[i]];

  // Backward through time. d(sum logprob)/dlogits_i = onehot - softmax.
  Eigen::VectorXd ds_next = Eigen::VectorXd::Zero(kFeatureDim);
  Eigen::VectorXd dh = Eigen::VectorXd::Zero(kFeatureDim);
  for (size_t i = n; i-- > 0;) {
    Eigen::VectorXd dlogits = -st.logprobs[i].array().exp();
    dlogits[target[i]] += 1.0;
    Eigen::VectorXd ds = w_out_.transpose() * dlogits + ds_next;
    Eigen::VectorXd da =
        ds.array() * (1.0 - st.s[i].array() * st.s[i].array());
    if (i > 0)
      ds_next = w_rec_.transpose() * da;
    else
      dh = w_img_.transpose() * da;
  }
  Eigen::VectorXd dpre_enc = dh.array() * st.gate.array() *
                             (1.0 - st.content.array() * st.content.array());
  Eigen::VectorXd dpre_gate = dh.array() * st.content.array() *
                              st.gate.array() * (1.0 - st.gate.array());
  Eigen::VectorXd dpool =
      w_enc_.transpose() * dpre_enc + w_gate_.transpose() * dpre_gate;

  out.grad = Tensor3(kChannels, kInputSize, kInputSize);
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < kInputSize; ++y)
      for (int x = 0; x < kInputSize; ++x)
        out.grad.at(c, y, x) =
            dpool[(c * kGrid + y / kPatch) * kGrid + x / kPatch] / kPatchArea;
  return out;
}

std::vector<int> ToyCaptioner::greedy_decode(const NormalizedTensor& z,
                                             const std::vector<int>& prompt,
                                             int max_len) const {
  if (max_len < 1) throw InputError("max_len must be >= 1");
  States st = run_forward(z, prompt, {});
  std::vector<int> out;
  Eigen::VectorXd s =
      (w_img_ * st.h + w_prompt_ * st.q + b_state_).array().tanh();
  for (int step = 0; step < max_len; ++step) {
    Eigen::VectorXd logits = w_out_ * s + b_out_;
    int best = 0;
    for (int t = 1; t < Tokenizer::kVocabSize; ++t)
      if (logits[t] > logits[best]) best = t;  // ties keep the lowest id
    out.push_back(best);
    if (best == Tokenizer::kEosId) break;
    s = (w_rec_ * s + w_tok_ * embed_.row(best).transpose() + b_rec_)
            .array()
            .tanh();
  }
  return out;
}

std::vector<double> ToyCaptioner::penultimate_features(
    const NormalizedTensor& z, const std::vector<int>& prompt) const {
  States st = run_forward(z, prompt, {});
  Eigen::VectorXd s1 =
      (w_img_ * st.h + w_prompt_ * st.q + b_state_).array().tanh();
  return std::vector<double>(s1.data(), s1.data() + s1.size());
}

std::vector<double> ToyCaptioner::pretrain(
    const std::vector<SupervisedExample>& examples, const PretrainConfig& cfg) {
  if (examples.empty()) throw InputError("pretrain: no examples");
  if (cfg.epochs < 1 || cfg.learning_rate <= 0.0)
    throw ConfigError("pretrain: epochs >= 1 and learning_rate > 0 required");
  Rng rng(cfg.seed);
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t idx : order) {
      const SupervisedExample& ex = examples[idx];
      if (ex.caption.empty()) throw InputError("pretrain: empty caption");
      States st = run_forward(ex.image, ex.prompt, ex.caption);
      size_t n = ex.caption.size();

      Eigen::MatrixXd d_w_out = Eigen::MatrixXd::Zero(w_out_.rows(), w_out_.cols());
      Eigen::VectorXd d_b_out = Eigen::VectorXd::Zero(b_out_.size());
      Eigen::MatrixXd d_w_rec = Eigen::MatrixXd::Zero(w_rec_.rows(), w_rec_.cols());
      Eigen::MatrixXd d_w_tok = Eigen::MatrixXd::Zero(w_tok_.rows(), w_tok_.cols());
      Eigen::VectorXd d_b_rec = Eigen::VectorXd::Zero(b_rec_.size());
      Eigen::MatrixXd d_w_img = Eigen::MatrixXd::Zero(w_img_.rows(), w_img_.cols());
      Eigen::MatrixXd d_w_prompt =
          Eigen::MatrixXd::Zero(w_prompt_.rows(), w_prompt_.cols());
      Eigen::VectorXd d_b_state = Eigen::VectorXd::Zero(b_state_.size());
      Eigen::MatrixXd d_embed = Eigen::MatrixXd::Zero(embed_.rows(), embed_.cols());

      // CE = -sum logprob; dCE/dlogits = softmax - onehot.
      Eigen::VectorXd ds_next = Eigen::VectorXd::Zero(kFeatureDim);
      Eigen::VectorXd dh = Eigen::VectorXd::Zero(kFeatureDim);
      Eigen::VectorXd dq = Eigen::VectorXd::Zero(kEmbedDim);
      for (size_t i = n; i-- > 0;) {
        loss_sum -= st.logprobs[i][ex.caption[i]] / examples.size();
        Eigen::VectorXd dlogits = st.logprobs[i].array().exp();
        dlogits[ex.caption[i]] -= 1.0;
        d_w_out += dlogits * st.s[i].transpose();
        d_b_out += dlogits;
        Eigen::VectorXd ds = w_out_.transpose() * dlogits + ds_next;
        Eigen::VectorXd da =
            ds.array() * (1.0 - st.s[i].array() * st.s[i].array());
        if (i > 0) {
          d_w_rec += da * st.s[i - 1].transpose();
          d_w_tok += da * embed_.row(ex.caption[i - 1]);
          d_b_rec += da;
          d_embed.row(ex.caption[i - 1]) += (w_tok_.transpose() * da).transpose();
          ds_next = w_rec_.transpose() * da;
        } else {
          d_w_img += da * st.h.transpose();
          d_w_prompt += da * st.q.transpose();
          d_b_state += da;
          dh = w_img_.transpose() * da;
          dq = w_prompt_.transpose() * da;
        }
      }
      if (!ex.prompt.empty()) {
        Eigen::VectorXd per = dq / static_cast<double>(ex.prompt.size());
        for (int id : ex.prompt) d_embed.row(id) += per.transpose();
      }
      Eigen::VectorXd dpre_enc =
          dh.array() * st.gate.array() *
          (1.0 - st.content.array() * st.content.array());
      Eigen::VectorXd dpre_gate = dh.array() * st.content.array() *
                                  st.gate.array() * (1.0 - st.gate.array());

      double lr = cfg.learning_rate;
      w_out_ -= lr * d_w_out;
      b_out_ -= lr * d_b_out;
      w_rec_ -= lr * d_w_rec;
      w_tok_ -= lr * d_w_tok;
      b_rec_ -= lr * d_b_rec;
      w_img_ -= lr * d_w_img;
      w_prompt_ -= lr * d_w_prompt;
      b_state_ -= lr * d_b_state;
      embed_ -= lr * d_embed;
      w_enc_ -= lr * (dpre_enc * st.pool.transpose());
      b_enc_ -= lr * dpre_enc;
      w_gate_ -= lr * (dpre_gate * st.pool.transpose());
      b_gate_ -= lr * dpre_gate;
    }
    if (!std::isfinite(loss_sum))
      throw NumericalError("pretrain: non-finite loss at epoch " +
                           std::to_string(epoch));
    epoch_losses.push_back(loss_sum);
  }
  return epoch_losses;
}

// ---------------------------------------------------------------------------
// Weight blob

namespace {

constexpr char kMagic[8] = {'S', 'A', 'U', 'P', 'T', 'O', 'Y', 'W'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u64(std::string& out, uint64_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_matrix(std::string& out, const Eigen::MatrixXd& m) {
  put_u32(out, static_cast<uint32_t>(m.rows()));
  put_u32(out, static_cast<uint32_t>(m.cols()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      out.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
}
void put_vector(std::string& out, const Eigen::VectorXd& v) {
  put_matrix(out, v);
}

struct BlobReader {
  const std::string& bytes;
  size_t pos = 0;

  void need(size_t n, const char* what) {
    if (pos + n > bytes.size())
      throw SchemaError(std::string("weight blob truncated at ") + what);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  }
  Eigen::MatrixXd matrix(int rows, int cols, const char* what) {
    uint32_t r = u32(what), c = u32(what);
    if (static_cast<int>(r) != rows || static_cast<int>(c) != cols)
      throw SchemaError(std::string("weight blob: ") + what + " is " +
                        std::to_string(r) + "x" + std::to_string(c) +
                        ", expected " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    Eigen::MatrixXd m(rows, cols);
    need(static_cast<size_t>(rows) * cols * 8, what);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        std::memcpy(&m(i, j), bytes.data() + pos, 8);
        pos += 8;
      }
    return m;
  }
};

}  // namespace

static std::string serialize_weights(const ToyCaptioner& model);

void ToyCaptioner::save_weights(const std::string& path) const {
  atomic_write(path, serialize_weights(*this));
}

static std::string serialize_weights(const ToyCaptioner& model) {
  auto& m = const_cast<ToyCaptioner&>(model);
  ToyCaptionerTestAccess w(m);
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, ToyCaptioner::kChannels);
  put_u32(out, ToyCaptioner::kInputSize);
  put_u32(out, ToyCaptioner::kPatch);
  put_u32(out, ToyCaptioner::kFeatureDim);
  put_u32(out, ToyCaptioner::kEmbedDim);
  put_u32(out, Tokenizer::kVocabSize);
  put_u64(out, model.init_seed());
  put_matrix(out, w.w_enc());
  put_vector(out, w.b_enc());
  put_matrix(out, w.w_gate());
  put_vector(out, w.b_gate());
  put_matrix(out, w.embed());
  put_matrix(out, w.w_img());
  put_matrix(out, w.w_prompt());
  put_vector(out, w.b_state());
  put_matrix(out, w.w_rec());
  put_matrix(out, w.w_tok());
  put_vector(out, w.b_rec());
  put_matrix(out, w.w_out());
  put_vector(out, w.b_out());
  return out;
}

ToyCaptioner ToyCaptioner::load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();

  BlobReader r{bytes};
  r.need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw SchemaError("'" + path + "' is not a weight blob");
  r.pos = sizeof kMagic;
  uint32_t version = r.u32("version");
  if (version != kVersion)
    throw SchemaError("weight blob version " + std::to_string(version) +
                      " unsupported (expected " + std::to_string(kVersion) + ")");
  auto expect = [&](uint32_t got, int want, const char* what) {
    if (static_cast<int>(got) != want)
      throw SchemaError(std::string("weight blob: ") + what + " = " +
                        std::to_string(got) + ", expected " +
                        std::to_string(want));
  };
  expect(r.u32("channels"), kChannels, "channels");
  expect(r.u32("input_size"), kInputSize, "input_size");
  expect(r.u32("patch"), kPatch, "patch");
  expect(r.u32("feature_dim"), kFeatureDim, "feature_dim");
  expect(r.u32("embed_dim"), kEmbedDim, "embed_dim");
  expect(r.u32("vocab"), Tokenizer::kVocabSize, "vocab");

  ToyCaptioner model;
  model.norm_ = NormalizationSpec::symmetric(kChannels, kInputSize, kInputSize);
  model.init_seed_ = r.u64("seed");
  model.w_enc_ = r.matrix(kFeatureDim, kPoolDim, "w_enc");
  model.b_enc_ = r.matrix(kFeatureDim, 1, "b_enc");
  model.w_gate_ = r.matrix(kFeatureDim, kPoolDim, "w_gate");
  model.b_gate_ = r.matrix(kFeatureDim, 1, "b_gate");
  model.embed_ = r.matrix(Tokenizer::kVocabSize, kEmbedDim, "embed");
  model.w_img_ = r.matrix(kFeatureDim, kFeatureDim, "w_img");
  model.w_prompt_ = r.matrix(kFeatureDim, kEmbedDim, "w_prompt");
  model.b_state_ = r.matrix(kFeatureDim, 1, "b_state");
  model.w_rec_ = r.matrix(kFeatureDim, kFeatureDim, "w_rec");
  model.w_tok_ = r.matrix(kFeatureDim, kEmbedDim, "w_tok");
  model.b_rec_ = r.matrix(kFeatureDim, 1, "b_rec");
  model.w_out_ = r.matrix(Tokenizer::kVocabSize, kFeatureDim, "w_out");
  model.b_out_ = r.matrix(Tokenizer::kVocabSize, 1, "b_out");
  if (r.pos != bytes.size())
    throw SchemaError("weight blob has " +
                      std::to_string(bytes.size() - r.pos) +
                      " trailing bytes");
  return model;
}

uint64_t ToyCaptioner::weights_hash() const {
  std::string blob = serialize_weights(*this);
  return fnv1a64(blob.data(), blob.size());
}

}  // namespace saup
