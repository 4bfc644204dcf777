#include "rocsurv/survival_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "rocsurv/errors.hpp"

namespace rocsurv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view field, std::size_t line_no, std::string_view column) {
  double value = 0.0;
  if (field.empty()) {
    throw DataError("line " + std::to_string(line_no) + ": missing value in column '" +
                    std::string(column) + "'");
  }
  const char* first = field.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw DataError("line " + std::to_string(line_no) + ": invalid number '" + std::string(field) +
                    "' in column '" + std::string(column) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, ptr);
}

}  // namespace

// --- CovariatePath ---------------------------------------------------------

std::size_t CovariatePath::segment_index(double t) const {
  const auto it = std::lower_bound(stops.begin(), stops.end(), t);
  if (it == stops.end()) return stops.size() - 1;
  return static_cast<std::size_t>(it - stops.begin());
}

void CovariatePath::validate() const {
  if (starts.empty() || starts.size() != stops.size()) {
    throw DataError("subject " + id + ": empty or inconsistent covariate history");
  }
  if (values.size() % starts.size() != 0) {
    throw DataError("subject " + id + ": covariate record size mismatch");
  }
  if (!(y > 0.0)) throw DataError("subject " + id + ": observed time must be positive");
  if (starts.front() != 0.0) {
    throw DataError("subject " + id + ": malformed history, first segment must start at 0");
  }
  for (std::size_t s = 0; s < starts.size(); ++s) {
    if (!(stops[s] > starts[s])) {
      throw DataError("subject " + id + ": malformed history, empty or reversed segment");
    }
    if (s + 1 < starts.size() && stops[s] != starts[s + 1]) {
      throw DataError("subject " + id + ": malformed history, overlapping or gapped segments");
    }
  }
  if (stops.back() != y) throw DataError("subject " + id + ": last segment must end at Y");
}

// --- Dataset ---------------------------------------------------------------

std::size_t Dataset::num_events() const {
  return static_cast<std::size_t>(
      std::count_if(subjects.begin(), subjects.end(), [](const auto& s) { return s.event; }));
}

Dataset Dataset::make(std::vector<CovariatePath> subjects, std::vector<std::string> covariate_names,
                      std::optional<double> horizon) {
  Dataset data;
  data.p = covariate_names.size();
  for (const auto& path : subjects) {
    path.validate();
    if (path.dim() != data.p) {
      throw DataError("subject " + path.id + ": expected " + std::to_string(data.p) +
                      " covariates, got " + std::to_string(path.dim()));
    }
  }
  data.subjects = std::move(subjects);
  data.covariate_names = std::move(covariate_names);
  if (data.num_events() == 0) throw DataError("dataset has no uncensored subjects");
  data.horizon = horizon ? *horizon : type1_quantile(sorted_uncensored_times(data), 0.95);
  if (!(data.horizon > 0.0)) throw DataError("analysis horizon must be positive");
  return data;
}

// --- Long format -----------------------------------------------------------

LongTable read_long_table(std::istream& in) {
  LongTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t num_columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      static constexpr std::string_view kRequired[] = {"id", "tstart", "tstop", "status"};
      if (fields.size() < 4) throw DataError("header must start with id,tstart,tstop,status");
      for (std::size_t c = 0; c < 4; ++c) {
        if (fields[c] != kRequired[c]) {
          throw DataError("header column " + std::to_string(c + 1) + " must be '" +
                          std::string(kRequired[c]) + "'");
        }
      }
      for (std::size_t c = 4; c < fields.size(); ++c) table.covariate_names.emplace_back(fields[c]);
      num_columns = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != num_columns) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(num_columns) + " fields, got " + std::to_string(fields.size()));
    }
    LongRow row;
    row.id = std::string(fields[0]);
    if (row.id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty id");
    row.tstart = parse_number(fields[1], line_no, "tstart");
    row.tstop = parse_number(fields[2], line_no, "tstop");
    const double status = parse_number(fields[3], line_no, "status");
    if (status != 0.0 && status != 1.0) {
      throw DataError("line " + std::to_string(line_no) + ": status must be 0 or 1");
    }
    row.status = static_cast<int>(status);
    row.z.reserve(num_columns - 4);
    for (std::size_t c = 4; c < num_columns; ++c) {
      row.z.push_back(parse_number(fields[c], line_no, table.covariate_names[c - 4]));
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw DataError("input has no header line");
  return table;
}

LongTable read_long_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_long_table(in);
}

std::vector<CovariatePath> paths_from_rows(const std::vector<LongRow>& rows, std::size_t p) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<const LongRow*>> groups;
  for (const auto& row : rows) {
    if (row.z.size() != p) throw DataError("subject " + row.id + ": covariate count mismatch");
    auto [it, inserted] = index.try_emplace(row.id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(&row);
  }
  std::vector<CovariatePath> paths;
  paths.reserve(groups.size());
  for (auto& group : groups) {
    std::stable_sort(group.begin(), group.end(),
                     [](const LongRow* a, const LongRow* b) { return a->tstart < b->tstart; });
    CovariatePath path;
    path.id = group.front()->id;
    for (std::size_t r = 0; r < group.size(); ++r) {
      const LongRow& row = *group[r];
      if (row.status == 1 && r + 1 != group.size()) {
        throw DataError("subject " + path.id + ": status=1 on a non-final row");
      }
      path.starts.push_back(row.tstart);
      path.stops.push_back(row.tstop);
      path.values.insert(path.values.end(), row.z.begin(), row.z.end());
    }
    path.y = path.stops.back();
    path.event = group.back()->status == 1;
    path.validate();
    paths.push_back(std::move(path));
  }
  return paths;
}

Dataset ingest_long_format(const LongTable& table, std::optional<double> horizon) {
  return Dataset::make(paths_from_rows(table.rows, table.covariate_names.size()),
                       table.covariate_names, horizon);
}

Dataset read_dataset_file(const std::string& path, std::optional<double> horizon) {
  return ingest_long_format(read_long_table_file(path), horizon);
}

void write_long_format(std::ostream& out, const Dataset& data) {
  out << "id,tstart,tstop,status";
  for (const auto& name : data.covariate_names) out << ',' << name;
  out << '\n';
  for (const auto& path : data.subjects) {
    for (std::size_t s = 0; s < path.num_segments(); ++s) {
      const bool last = s + 1 == path.num_segments();
      out << path.id << ',' << format_double(path.starts[s]) << ','
          << format_double(path.stops[s]) << ',' << ((last && path.event) ? 1 : 0);
      for (double v : path.segment_values(s)) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

// --- Quantiles and grids ---------------------------------------------------

double type1_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(n * prob));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::vector<double> sorted_uncensored_times(const Dataset& data) {
  std::vector<double> times;
  for (const auto& s : data.subjects) {
    if (s.event) times.push_back(s.y);
  }
  std::sort(times.begin(), times.end());
  return times;
}

std::size_t TimeGrid::nearest(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  if (it == times.end()) return times.size() - 1;
  const auto j = static_cast<std::size_t>(it - times.begin());
  const double mid = 0.5 * (times[j - 1] + times[j]);
  return t <= mid ? j - 1 : j;
}

void TimeGrid::validate() const {
  if (times.empty() || times.size() != weights.size()) throw DataError("time grid is empty");
  double total = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0 && !(times[k] > times[k - 1])) {
      throw DataError("time grid must be strictly increasing");
    }
    if (!(weights[k] >= 0.0)) throw DataError("time grid weights must be nonnegative");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-12) throw DataError("time grid weights must sum to 1");
}

TimeGrid uncensored_quantile_grid(const Dataset& data, std::size_t q) {
  if (q == 0) throw DataError("grid size must be at least 1");
  const auto uncensored = sorted_uncensored_times(data);
  TimeGrid grid;
  for (std::size_t k = 1; k <= q; ++k) {
    const double prob = static_cast<double>(k) / static_cast<double>(q + 1);
    const double t = std::min(type1_quantile(uncensored, prob), data.horizon);
    if (t > 0.0 && (grid.times.empty() || t > grid.times.back())) grid.times.push_back(t);
  }
  if (grid.times.size() < std::min<std::size_t>(q, 2)) {
    throw DataError("too few distinct uncensored times for the requested grid");
  }
  grid.weights.assign(grid.times.size(), 1.0 / static_cast<double>(grid.times.size()));
  return grid;
}

// --- ECDF transform --------------------------------------------------------

double at_risk_ecdf(const Dataset& data, double t, std::size_t coordinate, double z) {
  std::size_t at_risk = 0;
  std::size_t below = 0;
  for (const auto& s : data.subjects) {
    if (s.y < t) continue;
    ++at_risk;
    if (s.value(t, coordinate) <= z) ++below;
  }
  if (at_risk == 0) throw DataError("empty risk set at t = " + format_double(t));
  return static_cast<double>(below) / static_cast<double>(at_risk);
}

EcdfTable::EcdfTable(const Dataset& data, const TimeGrid& grid) : grid_(grid), p_(data.p) {
  sorted_.assign(grid.size() + 1, std::vector<std::vector<double>>(p_));
  for (const auto& s : data.subjects) {
    const auto base = s.segment_values(0);
    for (std::size_t c = 0; c < p_; ++c) sorted_[0][c].push_back(base[c]);
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.times[k];
    for (const auto& s : data.subjects) {
      if (s.y < t) continue;
      const auto v = s.values_at(t);
      for (std::size_t c = 0; c < p_; ++c) sorted_[k + 1][c].push_back(v[c]);
    }
    if (p_ > 0 && sorted_[k + 1][0].empty()) {
      throw DataError("empty risk set at grid time " + format_double(t));
    }
  }
  for (auto& anchor : sorted_) {
    for (auto& column : anchor) std::sort(column.begin(), column.end());
  }
}

EcdfTable EcdfTable::from_parts(TimeGrid grid, std::size_t p,
                                std::vector<std::vector<std::vector<double>>> sorted) {
  if (sorted.size() != grid.size() + 1) throw DataError("ECDF table anchor count mismatch");
  for (const auto& anchor : sorted) {
    if (anchor.size() != p) throw DataError("ECDF table dimension mismatch");
    for (const auto& column : anchor) {
      if (column.empty() || !std::is_sorted(column.begin(), column.end())) {
        throw DataError("ECDF table columns must be nonempty and sorted");
      }
    }
  }
  EcdfTable table;
  table.grid_ = std::move(grid);
  table.p_ = p;
  table.sorted_ = std::move(sorted);
  return table;
}

double EcdfTable::transform(std::size_t anchor, std::size_t coordinate, double z) const {
  const auto& column = sorted_[anchor][coordinate];
  const auto below = std::upper_bound(column.begin(), column.end(), z) - column.begin();
  return static_cast<double>(below) / static_cast<double>(column.size());
}

void EcdfTable::transform(std::size_t anchor, std::span<const double> raw,
                          std::span<double> out) const {
  for (std::size_t c = 0; c < p_; ++c) out[c] = transform(anchor, c, raw[c]);
}

std::size_t TransformedPath::piece_index(double u) const {
  const auto it = std::lower_bound(stops.begin(), stops.end(), u);
  if (it == stops.end()) return stops.size() - 1;
  return static_cast<std::size_t>(it - stops.begin());
}

TransformedPath transform_path(const CovariatePath& path, const EcdfTable& ecdf, double until) {
  std::vector<double> breaks;
  for (double stop : path.stops) {
    if (stop < until) breaks.push_back(stop);
  }
  const auto& times = ecdf.grid().times;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double mid = 0.5 * (times[k] + times[k + 1]);
    if (mid < until) breaks.push_back(mid);
  }
  breaks.push_back(until);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [](double b) { return b <= 0.0; }),
               breaks.end());

  const std::size_t p = ecdf.dim();
  TransformedPath out;
  out.stops = breaks;
  out.values.resize(breaks.size() * p);
  for (std::size_t j = 0; j < breaks.size(); ++j) {
    ecdf.transform(ecdf.anchor_for_time(breaks[j]), path.values_at(breaks[j]),
                   std::span<double>(out.values.data() + j * p, p));
  }
  return out;
}

TransformedDataset transform(std::shared_ptr<const Dataset> data, const TimeGrid& grid) {
  grid.validate();
  for (double t : grid.times) {
    if (!(t > 0.0) || t > data->horizon) throw DataError("grid time outside (0, s]");
  }
  TransformedDataset td;
  td.source = data;
  td.grid = grid;
  td.ecdf = EcdfTable(*data, grid);
  const std::size_t n = data->size();
  const std::size_t p = data->p;
  td.baseline = Matrix(n, p);
  td.at_event = Matrix(n, p);
  td.paths.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = data->subjects[i];
    td.ecdf.transform(0, s.segment_values(0), td.baseline.row(i));
    td.ecdf.transform(td.ecdf.anchor_for_time(s.y), s.values_at(s.y), td.at_event.row(i));
    td.paths.push_back(transform_path(s, td.ecdf, s.y));
  }
  td.at_risk.resize(grid.size());
  td.grid_values.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.times[k];
    for (std::size_t i = 0; i < n; ++i) {
      if (data->subjects[i].y >= t) td.at_risk[k].push_back(i);
    }
    td.grid_values[k] = Matrix(td.at_risk[k].size(), p);
    for (std::size_t r = 0; r < td.at_risk[k].size(); ++r) {
      td.ecdf.transform(k + 1, data->subjects[td.at_risk[k][r]].values_at(t),
                        td.grid_values[k].row(r));
    }
  }
  return td;
}

std::vector<double> kaplan_meier(const Dataset& data, std::span<const double> times) {
  std::vector<std::pair<double, bool>> obs;
  obs.reserve(data.size());
  for (const auto& s : data.subjects) obs.emplace_back(s.y, s.event);
  std::sort(obs.begin(), obs.end());
  std::vector<double> event_times;
  std::vector<double> survival_after;
  double surv = 1.0;
  std::size_t at_risk = obs.size();
  for (std::size_t i = 0; i < obs.size();) {
    std::size_t j = i;
    std::size_t deaths = 0;
    while (j < obs.size() && obs[j].first == obs[i].first) {
      deaths += obs[j].second ? 1 : 0;
      ++j;
    }
    if (deaths > 0) {
      surv *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      event_times.push_back(obs[i].first);
      survival_after.push_back(surv);
    }
    at_risk -= j - i;
    i = j;
  }
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    const auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
    out.push_back(it == event_times.begin() ? 1.0 : survival_after[it - event_times.begin() - 1]);
  }
  return out;
}

}  // namespace rocsurv
