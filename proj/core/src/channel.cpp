#include "rsspos/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "rsspos/error.hpp"

namespace rsspos {
namespace {

void check_channel(int ch) {
  if (ch < kMinChannel || ch > kMaxChannel) {
    throw Error(ErrorCode::ChannelOutOfRange, "channel " + std::to_string(ch) + " not in [1, 13]");
  }
}

void check_distance(const ChannelModel& model, double distance_m) {
  if (!std::isfinite(distance_m) || distance_m < model.ref_distance_m) {
    throw Error(ErrorCode::BelowReferenceDistance,
                "distance " + std::to_string(distance_m) + " m below reference distance");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, const char* column) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad number in column ") + column + ": '" + text + "'");
  }
  return v;
}

}  // namespace

void ChannelModel::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, msg);
  };
  require(std::isfinite(ref_distance_m) && ref_distance_m > 0.0, "ref_distance_m must be > 0");
  require(std::isfinite(ref_rss_dbm), "ref_rss_dbm must be finite");
  require(std::isfinite(path_loss_exponent) && path_loss_exponent > 0.0, "path_loss_exponent must be > 0");
  require(far_sigma_db >= 0.0 && near_sigma_db >= 0.0 && interference_sigma_db >= 0.0,
          "sigmas must be >= 0");
  require(near_field_m >= 0.0, "near_field_m must be >= 0");
  require(std::isfinite(rss_floor_dbm), "rss_floor_dbm must be finite");
  require(near_tail_db >= 0.0, "near_tail_db must be >= 0");
  require(near_tail_m > 0.0, "near_tail_m must be > 0");
}

double ChannelModel::base_sigma_db(double distance_m) const {
  if (distance_m < near_field_m) return near_sigma_db;
  return far_sigma_db + near_tail_db * std::exp(-(distance_m - near_field_m) / near_tail_m);
}

double expected_rss(const ChannelModel& model, double distance_m) {
  return expected_rss(model, distance_m, model.ref_rss_dbm);
}

double expected_rss(const ChannelModel& model, double distance_m, double ref_rss_dbm) {
  check_distance(model, distance_m);
  const double rss =
      ref_rss_dbm - 10.0 * model.path_loss_exponent * std::log10(distance_m / model.ref_distance_m);
  return std::max(rss, model.rss_floor_dbm);
}

bool channels_overlap(int a, int b) {
  check_channel(a);
  check_channel(b);
  return std::abs(a - b) < 5;
}

double sample_rss(const ChannelModel& model, double distance_m, double ref_rss_dbm, int n_interferers,
                  Rng& rng) {
  check_distance(model, distance_m);
  if (n_interferers < 0) throw Error(ErrorCode::InvalidArgument, "negative interferer count");
  const double mean = ref_rss_dbm - 10.0 * model.path_loss_exponent *
                                        std::log10(distance_m / model.ref_distance_m);
  const double base = model.base_sigma_db(distance_m);
  const double sigma = std::sqrt(base * base + n_interferers * model.interference_sigma_db *
                                                   model.interference_sigma_db);
  // Always draw so that the stream position does not depend on sigma.
  const double noise = rng.normal();
  return std::max(mean + sigma * noise, model.rss_floor_dbm);
}

double sample_rss(const ChannelModel& model, double distance_m, int n_cochannel_interferers, Rng& rng) {
  return sample_rss(model, distance_m, model.ref_rss_dbm, n_cochannel_interferers, rng);
}

void SurveyLayout::validate() const {
  if (!(step_m > 0.0) || !std::isfinite(step_m)) throw Error(ErrorCode::InvalidArgument, "step_m must be > 0");
  if (!std::isfinite(start_m) || !std::isfinite(end_m) || end_m < start_m) {
    throw Error(ErrorCode::InvalidArgument, "end_m must be >= start_m");
  }
  if (rsus.empty()) throw Error(ErrorCode::InvalidArgument, "layout has no RSUs");
  std::set<std::string> ids;
  for (const auto& rsu : rsus) {
    check_channel(rsu.channel);
    if (rsu.id.empty() || rsu.id.find(',') != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "RSU id must be non-empty and comma-free");
    }
    if (!ids.insert(rsu.id).second) throw Error(ErrorCode::InvalidArgument, "duplicate RSU id " + rsu.id);
    if (!(rsu.beacon_interval_ms > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "beacon_interval_ms must be > 0 for " + rsu.id);
    }
  }
}

std::vector<double> SurveyLayout::positions() const {
  const auto count = static_cast<std::size_t>(std::floor((end_m - start_m) / step_m + 1e-9)) + 1;
  std::vector<double> xs(count);
  for (std::size_t i = 0; i < count; ++i) xs[i] = start_m + static_cast<double>(i) * step_m;
  return xs;
}

const Rsu& SurveyLayout::rsu(const std::string& id) const {
  for (const auto& r : rsus) {
    if (r.id == id) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown RSU id " + id);
}

int SurveyLayout::cochannel_interferers(const Rsu& self) const {
  int n = 0;
  for (const auto& other : rsus) {
    if (other.id != self.id && channels_overlap(self.channel, other.channel)) ++n;
  }
  return n;
}

SurveyLayout default_layout(int ch0, int ch100, int ch200) {
  SurveyLayout layout;
  layout.rsus = {
      Rsu{"ap0", LocalPoint{0.0, 0.0, 1.10}, ch0, std::nullopt, 100.0},
      Rsu{"ap100", LocalPoint{100.0, 0.0, 1.10}, ch100, std::nullopt, 100.0},
      Rsu{"ap200", LocalPoint{200.0, 0.0, 1.10}, ch200, std::nullopt, 100.0},
  };
  return layout;
}

std::vector<RssSample> SurveyDataset::for_rsu(const std::string& rsu_id) const {
  std::vector<RssSample> out;
  for (const auto& s : samples) {
    if (s.rsu_id == rsu_id) out.push_back(s);
  }
  return out;
}

SurveyDataset generate_survey(const SurveyLayout& layout, const ChannelModel& model, std::uint64_t seed) {
  layout.validate();
  model.validate();

  std::vector<const Rsu*> ordered;
  for (const auto& r : layout.rsus) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](const Rsu* a, const Rsu* b) { return a->id < b->id; });

  SurveyDataset dataset{layout, {}, seed};
  const auto xs = layout.positions();
  dataset.samples.reserve(xs.size() * ordered.size());
  Rng rng(seed);
  for (double x : xs) {
    const LocalPoint vehicle = layout.vehicle_at(x);
    for (const Rsu* rsu : ordered) {
      const double d = distance(vehicle, rsu->position);
      const double ref = rsu->tx_ref_rss_dbm.value_or(model.ref_rss_dbm);
      const double rss = sample_rss(model, d, ref, layout.cochannel_interferers(*rsu), rng);
      dataset.samples.push_back(RssSample{x, rsu->id, rss, d});
    }
  }
  return dataset;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

void write_survey_csv(std::ostream& out, const SurveyDataset& dataset) {
  std::vector<const RssSample*> rows;
  for (const auto& s : dataset.samples) rows.push_back(&s);
  std::stable_sort(rows.begin(), rows.end(), [](const RssSample* a, const RssSample* b) {
    if (a->x_m != b->x_m) return a->x_m < b->x_m;
    return a->rsu_id < b->rsu_id;
  });
  out << "x_m,rsu_id,rss_dbm,true_distance_m,channel\n";
  for (const RssSample* s : rows) {
    out << format_fixed(s->x_m) << ',' << s->rsu_id << ',' << format_fixed(s->rss_dbm) << ','
        << (s->true_distance_m ? format_fixed(*s->true_distance_m) : std::string()) << ','
        << dataset.layout.rsu(s->rsu_id).channel << '\n';
  }
}

std::vector<SurveyRow> read_survey_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidArgument, "empty survey CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  auto column = [&](const char* name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::InvalidArgument, std::string("missing column ") + name);
    return it - header.begin();
  };
  const auto cx = column("x_m");
  const auto cid = column("rsu_id");
  const auto crss = column("rss_dbm");
  const auto cdist = column("true_distance_m");
  const auto cch = column("channel");

  std::vector<SurveyRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": wrong field count");
    }
    SurveyRow row;
    row.sample.x_m = parse_double(f[cx], "x_m");
    row.sample.rsu_id = f[cid];
    if (row.sample.rsu_id.empty()) throw Error(ErrorCode::InvalidArgument, "empty rsu_id");
    row.sample.rss_dbm = parse_double(f[crss], "rss_dbm");
    if (!f[cdist].empty()) row.sample.true_distance_m = parse_double(f[cdist], "true_distance_m");
    const double ch = parse_double(f[cch], "channel");
    row.channel = static_cast<int>(ch);
    if (row.channel != ch) throw Error(ErrorCode::InvalidArgument, "non-integer channel");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rsspos
