#include "ufse/losses.hpp"

#include <fstream>
#include <sstream>

#include "ufse/csv.hpp"
#include "ufse/featstats.hpp"
#include "ufse/ops.hpp"

namespace ufse {

UncorrelationMode parse_uncorrelation_mode(const std::string& name) {
  if (name == "absolute") return UncorrelationMode::Absolute;
  if (name == "signed") return UncorrelationMode::Signed;
  throw UsageError("unknown uncorrelation mode '" + name + "' (expected signed or absolute)");
}

std::string to_string(UncorrelationMode mode) {
  return mode == UncorrelationMode::Absolute ? "absolute" : "signed";
}

template <typename T>
Tensor<T> content_loss(const Tensor<T>& out, const Tensor<T>& target) {
  if (out.dims() != target.dims()) {
    throw UsageError("content_loss: shape mismatch " + shape_string(out.dims()) + " vs " +
                     shape_string(target.dims()));
  }
  return mse(out, target);
}

template <typename T>
Tensor<T> style_loss(const BasicFeatureSet<T>& out, const BasicFeatureSet<T>& style,
                     const std::vector<std::string>& tags) {
  if (tags.empty()) throw UsageError("style_loss needs at least one tap");
  Tensor<T> total;
  for (const auto& tag : tags) {
    if (!out.contains(tag) || !style.contains(tag)) throw UsageError("style_loss: tap '" + tag + "' missing");
    const auto& a = out.at(tag);
    const auto& b = style.at(tag);
    const auto ca = channel_rows(a).dim(0), cb = channel_rows(b).dim(0);
    if (ca != cb) {
      throw UsageError("style_loss: tap '" + tag + "' has " + std::to_string(ca) + " vs " + std::to_string(cb) +
                       " channels");
    }
    auto term = mse(gram(a), gram(b));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

template <typename T>
Tensor<T> style_loss(const BasicFeatureSet<T>& out, const BasicFeatureSet<T>& style) {
  for (const auto& tag : out.tags()) {
    if (!style.contains(tag)) throw UsageError("style_loss: tap '" + tag + "' has no style counterpart");
  }
  return style_loss(out, style, style.tags());
}

namespace {

template <typename T>
Tensor<T> off_diagonal_sum(const Tensor<T>& features, UncorrelationMode mode) {
  Tensor<T> r = channel_correlation(features);
  const std::int64_t c = r.dim(0);
  std::vector<T> mask(static_cast<std::size_t>(c * c), T(1));
  for (std::int64_t i = 0; i < c; ++i) mask[i * c + i] = T(0);
  if (mode == UncorrelationMode::Absolute) r = sqrt(add_scalar(square(r), T(1e-12)));
  return reduce_sum(mul(r, Tensor<T>(Shape{c, c}, std::move(mask))));
}

}  // namespace

template <typename T>
Tensor<T> uncorrelation_loss(const Tensor<T>& content_features, const Tensor<T>& style_features,
                             UncorrelationMode mode) {
  return mul_scalar(add(off_diagonal_sum(content_features, mode), off_diagonal_sum(style_features, mode)), T(0.5));
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& content, const Tensor<T>& style, const Tensor<T>& uncorrelation,
                     const LossWeights& w) {
  return add(add(mul_scalar(content, static_cast<T>(w.content)), mul_scalar(style, static_cast<T>(w.style))),
             mul_scalar(uncorrelation, static_cast<T>(w.uncorrelation)));
}

double total_loss(double content, double style, double uncorrelation, const LossWeights& w) {
  return w.content * content + w.style * style + w.uncorrelation * uncorrelation;
}

std::vector<double> smoothed(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw UsageError("smoothing window must be positive");
  std::vector<double> out(values.size());
  double running = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    running += values[i];
    if (i >= window) running -= values[i - window];
    out[i] = running / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

LossHistoryWriter::LossHistoryWriter(std::ostream& out) : out_(out) {
  out_ << "iteration,content,style,uncorrelation,total\n";
}

void LossHistoryWriter::write(const LossReport& r) {
  out_ << r.iteration << ',' << csv::format(r.content) << ',' << csv::format(r.style) << ','
       << csv::format(r.uncorrelation) << ',' << csv::format(r.total) << '\n';
}

void write_loss_history(const std::string& path, const std::vector<LossReport>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  LossHistoryWriter writer(out);
  for (const auto& r : history) writer.write(r);
  if (!out) throw IoError("failed writing " + path);
}

std::vector<LossReport> read_loss_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "iteration,content,style,uncorrelation,total") throw IoError("unexpected loss history header in " + path);
  std::vector<LossReport> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    LossReport r;
    char comma;
    if (!(ss >> r.iteration >> comma >> r.content >> comma >> r.style >> comma >> r.uncorrelation >> comma >>
          r.total)) {
      throw IoError("malformed loss history row in " + path + ": " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

#define UFSE_INSTANTIATE_LOSSES(T)                                                                            \
  template Tensor<T> content_loss(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> style_loss(const BasicFeatureSet<T>&, const BasicFeatureSet<T>&);                        \
  template Tensor<T> style_loss(const BasicFeatureSet<T>&, const BasicFeatureSet<T>&,                         \
                                const std::vector<std::string>&);                                             \
  template Tensor<T> uncorrelation_loss(const Tensor<T>&, const Tensor<T>&, UncorrelationMode);               \
  template Tensor<T> total_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const LossWeights&);

UFSE_INSTANTIATE_LOSSES(float)
UFSE_INSTANTIATE_LOSSES(double)

}  // namespace ufse
