#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "mfpi/experiments.hpp"

namespace mfpi {
namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

nlohmann::json config_to_json(const SyntheticConfig& cfg) {
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : cfg.methods) methods.push_back(std::string(to_string(m)));
  return {
      {"n", cfg.n},
      {"sigma", cfg.sigma},
      {"alpha", cfg.alpha},
      {"K", cfg.K},
      {"M", cfg.M},
      {"B", cfg.B},
      {"x_f", cfg.x_f},
      {"estimator", std::string(to_string(cfg.estimator))},
      {"methods", methods},
      {"seed", cfg.seed},
      {"profile", std::string(to_string(cfg.profile))},
      {"mfb_predictor", std::string(to_string(cfg.predictor))},
      {"mfb_scheme", std::string(to_string(cfg.scheme))},
      {"mfb_variant", std::string(to_string(cfg.variant))},
      {"cp_mode", std::string(to_string(cfg.cp_mode))},
  };
}

SyntheticConfig config_from_json(const nlohmann::json& j) {
  SyntheticConfig cfg;
  cfg.n = j.at("n").get<std::size_t>();
  cfg.sigma = j.at("sigma").get<double>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.K = j.at("K").get<std::size_t>();
  cfg.M = j.at("M").get<std::size_t>();
  cfg.B = j.at("B").get<std::size_t>();
  cfg.x_f = j.at("x_f").get<double>();
  cfg.estimator = parse_estimator_kind(j.at("estimator").get<std::string>());
  cfg.methods.clear();
  for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.profile = parse_profile(j.at("profile").get<std::string>());
  cfg.predictor = parse_functional(j.at("mfb_predictor").get<std::string>());
  cfg.scheme = parse_scheme(j.at("mfb_scheme").get<std::string>());
  cfg.variant = parse_variant(j.at("mfb_variant").get<std::string>());
  cfg.cp_mode = parse_cp_mode(j.at("cp_mode").get<std::string>());
  return cfg;
}

nlohmann::json report_to_json(const CoverageReport& report) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : report.methods) {
    methods.push_back({
        {"name", m.name},
        {"cvp_mean", m.cvp_mean},
        {"cvp_var", m.cvp_var},
        {"mean_length", m.mean_length},
        {"cvp_values", m.cvp},
    });
  }
  nlohmann::json out = {
      {"config", config_to_json(report.config)},
      {"methods", methods},
      {"profile", std::string(to_string(report.config.profile))},
      {"seed", report.config.seed},
      {"runtime_s", nullptr},
      {"redrawn", report.redrawn},
      {"version", MFPI_VERSION},
  };
  if (report.runtime_s) out["runtime_s"] = *report.runtime_s;
  return out;
}

std::string figure_csv(std::span<const CoverageReport> reports) {
  std::ostringstream out;
  out << "n,estimator,method,coverage_mean,coverage_var_scaled,mean_length\n";
  for (const auto& report : reports) {
    const auto n = report.config.n;
    for (const auto& m : report.methods) {
      const auto dash = m.name.find('-');
      const std::string method = dash == std::string::npos ? m.name : m.name.substr(0, dash);
      out << n << ',' << to_string(report.config.estimator) << ',' << method << ','
          << format_number(m.cvp_mean) << ','
          << format_number(m.cvp_var * static_cast<double>(n)) << ','
          << format_number(m.mean_length) << '\n';
    }
  }
  return out.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot move report into place at " + path.string() + ": " +
                             ec.message());
  }
}

}  // namespace mfpi
