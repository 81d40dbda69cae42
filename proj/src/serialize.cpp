#include "byzmix/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace byzmix {

using nlohmann::json;

std::string encode_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double decode_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) throw std::invalid_argument("expected a number or hex-float string");
  const auto& s = j.get_ref<const std::string&>();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::invalid_argument("malformed number '" + s + "'");
  return v;
}

namespace {

json encode_vector(const Eigen::Ref<const Vector>& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(encode_double(v[i]));
  return arr;
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("mixture JSON is missing '") + key + "'");
  return *it;
}

}  // namespace

json to_json(const MixingDistribution& g) {
  json j;
  j["family"] = std::string(family_name(g.family()));
  j["K"] = g.order();
  j["d"] = g.dim();
  json w = json::array();
  for (double x : g.weights()) w.push_back(encode_double(x));
  j["weights"] = std::move(w);
  json comps = json::array();
  for (int k = 0; k < g.order(); ++k) {
    json c;
    if (g.family() == Family::Gaussian) {
      const auto& gc = g.gaussian(k);
      c["mean"] = encode_vector(gc.mean());
      json cov = json::array();
      for (int r = 0; r < gc.dim(); ++r)
        for (int col = 0; col < gc.dim(); ++col) cov.push_back(encode_double(gc.covariance()(r, col)));
      c["covariance"] = std::move(cov);
    } else {
      c["shape"] = encode_double(g.gamma(k).shape());
      c["scale"] = encode_double(g.gamma(k).scale());
    }
    comps.push_back(std::move(c));
  }
  j["components"] = std::move(comps);
  return j;
}

MixingDistribution mixture_from_json(const json& j) {
  const Family family = parse_family(field(j, "family").get<std::string>());
  const int K = field(j, "K").get<int>();
  const int d = field(j, "d").get<int>();
  const auto& jw = field(j, "weights");
  const auto& jc = field(j, "components");
  if (K < 1 || d < 1) throw std::invalid_argument("mixture JSON needs K >= 1 and d >= 1");
  if (static_cast<int>(jw.size()) != K || static_cast<int>(jc.size()) != K)
    throw std::invalid_argument("mixture JSON: weights/components length differs from K");
  if (family == Family::Gamma && d != 1) throw std::invalid_argument("Gamma mixtures are one-dimensional");

  std::vector<double> w;
  for (const auto& x : jw) w.push_back(decode_double(x));
  std::vector<Component> comps;
  for (const auto& c : jc) {
    if (family == Family::Gamma) {
      comps.emplace_back(GammaComponent(decode_double(field(c, "shape")), decode_double(field(c, "scale"))));
      continue;
    }
    const auto& jm = field(c, "mean");
    const auto& js = field(c, "covariance");
    if (static_cast<int>(jm.size()) != d || static_cast<int>(js.size()) != d * d)
      throw std::invalid_argument("mixture JSON: mean/covariance size does not match d");
    Vector mean(d);
    Matrix cov(d, d);
    for (int i = 0; i < d; ++i) mean[i] = decode_double(jm[static_cast<std::size_t>(i)]);
    for (int i = 0; i < d * d; ++i) cov(i / d, i % d) = decode_double(js[static_cast<std::size_t>(i)]);
    comps.emplace_back(GaussianComponent(std::move(mean), std::move(cov)));
  }
  return {std::move(w), std::move(comps)};
}

void write_mixture(const std::filesystem::path& path, const MixingDistribution& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(g).dump(2) << '\n';
}

MixingDistribution read_mixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return mixture_from_json(json::parse(in));
}

}  // namespace byzmix
