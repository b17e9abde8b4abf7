#include "gait/recognizer/recognizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "gait/error.hpp"

namespace gait::recognizer {

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

}  // namespace

std::string_view to_string(Metric m) { return m == Metric::l1 ? "l1" : "l2"; }

Metric parse_metric(std::string_view s) {
  if (s == "l1" || s == "L1") return Metric::l1;
  if (s == "l2" || s == "L2") return Metric::l2;
  throw ConfigError("unknown metric '" + std::string(s) + "' (l1 | l2)");
}

double distance(std::span<const double> a, std::span<const double> b, Metric m) {
  if (a.size() != b.size()) {
    throw InputError("descriptor dimensions differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0;
  if (m == Metric::l1) {
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
  }
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Gallery::Gallery(std::vector<Labeled> entries, Metric metric) : entries_(std::move(entries)), metric_(metric) {
  if (entries_.empty()) throw InputError("gallery is empty");
  dim_ = entries_[0].vector.size();
  for (const auto& e : entries_) {
    if (e.vector.size() != dim_) throw InputError("gallery vectors differ in dimension");
    labels_.push_back(e.label);
  }
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
}

bool Gallery::enrolled(int label) const { return std::binary_search(labels_.begin(), labels_.end(), label); }

std::vector<Ranked> classify(const Gallery& gallery, std::span<const double> probe) {
  if (probe.size() != gallery.dim()) {
    throw InputError("probe dimension " + std::to_string(probe.size()) + " does not match gallery dimension " +
                     std::to_string(gallery.dim()));
  }
  const auto& labels = gallery.labels();
  std::vector<Ranked> out(labels.size());
  std::vector<bool> seen(labels.size(), false);
  for (std::size_t i = 0; i < labels.size(); ++i) out[i].label = labels[i];
  for (const auto& e : gallery.entries()) {
    const auto idx = std::size_t(std::lower_bound(labels.begin(), labels.end(), e.label) - labels.begin());
    const double d = distance(e.vector, probe, gallery.metric());
    if (!seen[idx] || d < out[idx].distance) {
      out[idx].distance = d;
      seen[idx] = true;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.label < b.label);
  });
  return out;
}

Identification evaluate_identification(const Gallery& gallery, std::span<const Labeled> probes) {
  if (probes.empty()) throw InputError("no probes to evaluate");
  const std::size_t k = gallery.labels().size();
  Identification id;
  std::vector<std::size_t> hits(k + 1, 0);
  for (const auto& p : probes) {
    if (!gallery.enrolled(p.label)) throw InputError("probe subject " + std::to_string(p.label) + " is not enrolled");
    const auto ranked = classify(gallery, p.vector);
    const auto pos = std::size_t(std::find_if(ranked.begin(), ranked.end(), [&](const Ranked& r) { return r.label == p.label; }) -
                                 ranked.begin());
    id.true_rank.push_back(pos + 1);
    ++hits[pos + 1];
  }
  std::size_t cum = 0;
  for (std::size_t r = 1; r <= k; ++r) {
    cum += hits[r];
    id.cmc.push_back(double(cum) / double(probes.size()));
  }
  id.rank1 = id.cmc[0];
  id.rank5 = id.cmc[std::min<std::size_t>(5, k) - 1];
  return id;
}

Verification verification_from_scores(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) throw InputError("verification needs both genuine and impostor pairs");
  std::vector<double> g(genuine.begin(), genuine.end()), im(impostor.begin(), impostor.end());
  for (double s : g)
    if (std::isnan(s)) throw NumericError("NaN verification score");
  for (double s : im)
    if (std::isnan(s)) throw NumericError("NaN verification score");
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::vector<double> thresholds(g);
  thresholds.insert(thresholds.end(), im.begin(), im.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  Verification v;
  v.genuine = g.size();
  v.impostor = im.size();
  std::size_t gi = 0, ii = 0;  // counts of scores <= threshold
  for (double t : thresholds) {
    while (gi < g.size() && g[gi] <= t) ++gi;
    while (ii < im.size() && im[ii] <= t) ++ii;
    v.roc.push_back({t, double(ii) / double(im.size()), double(g.size() - gi) / double(g.size())});
  }
  double prev_far = 0.0, prev_frr = 1.0;
  for (const auto& p : v.roc) {
    const double d = p.far - p.frr;
    if (d >= 0) {
      const double d0 = prev_far - prev_frr;
      if (d == 0) {
        v.eer = p.far;
      } else {
        const double a = -d0 / (d - d0);
        v.eer = prev_far + a * (p.far - prev_far);
      }
      break;
    }
    prev_far = p.far;
    prev_frr = p.frr;
  }
  return v;
}

Verification evaluate_verification(std::span<const Labeled> gallery_side, std::span<const Labeled> probe_side,
                                   Metric metric, PairScoring scoring) {
  if (gallery_side.empty() || probe_side.empty()) throw InputError("verification needs non-empty sides");
  std::vector<double> genuine, impostor;
  if (scoring == PairScoring::per_video) {
    for (const auto& p : probe_side)
      for (const auto& g : gallery_side) (g.label == p.label ? genuine : impostor).push_back(distance(g.vector, p.vector, metric));
  } else {
    const Gallery gallery(std::vector<Labeled>(gallery_side.begin(), gallery_side.end()), metric);
    for (const auto& p : probe_side)
      for (const auto& r : classify(gallery, p.vector)) (r.label == p.label ? genuine : impostor).push_back(r.distance);
  }
  return verification_from_scores(genuine, impostor);
}

EvalReport evaluate(const Gallery& gallery, std::span<const Labeled> probes, PairScoring scoring) {
  EvalReport r;
  r.metric = gallery.metric();
  r.gallery_size = gallery.entries().size();
  r.probe_count = probes.size();
  r.identification = evaluate_identification(gallery, probes);
  r.verification = evaluate_verification(gallery.entries(), probes, gallery.metric(), scoring);
  return r;
}

std::string EvalReport::to_text() const {
  std::string out;
  auto kv = [&](const char* key, double v) {
    out += key;
    out += " = ";
    append_number(out, v);
    out += '\n';
  };
  out += "metric = " + std::string(to_string(metric)) + '\n';
  out += "gallery = " + std::to_string(gallery_size) + '\n';
  out += "probes = " + std::to_string(probe_count) + '\n';
  kv("rank1", identification.rank1);
  kv("rank5", identification.rank5);
  kv("eer", verification.eer);
  out += "genuine_pairs = " + std::to_string(verification.genuine) + '\n';
  out += "impostor_pairs = " + std::to_string(verification.impostor) + '\n';
  out += "cmc =";
  for (double c : identification.cmc) {
    out += ' ';
    append_number(out, c);
  }
  out += '\n';
  return out;
}

std::string EvalReport::cmc_csv() const {
  std::string out = "rank,fraction\n";
  for (std::size_t r = 0; r < identification.cmc.size(); ++r) {
    out += std::to_string(r + 1) + ',';
    append_number(out, identification.cmc[r]);
    out += '\n';
  }
  return out;
}

std::string EvalReport::roc_csv() const {
  std::string out = "threshold,far,frr\n";
  for (const auto& p : verification.roc) {
    append_number(out, p.threshold);
    out += ',';
    append_number(out, p.far);
    out += ',';
    append_number(out, p.frr);
    out += '\n';
  }
  return out;
}

}  // namespace gait::recognizer
