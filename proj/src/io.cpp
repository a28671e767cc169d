#include "swjd/io.hpp"

#include "swjd/types.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>

namespace swjd {

namespace {

static_assert(std::endian::native == std::endian::little, "event log writer assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'W', 'J', 'D', 'E', 'V', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}
  template <class T>
  T get() {
    if (s_.size() - pos_ < sizeof(T)) throw InvalidInput("event log truncated at byte " + std::to_string(pos_));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t remaining() const { return s_.size() - pos_; }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

void row(std::string& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
}

void append_vector(std::string& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += ',';
    out += format_double(v(i));
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string path_csv(const PathRecord& path) {
  const int d = path.states.empty() ? path.terminal.dim() : path.states.front().dim();
  std::string out = "t";
  for (int i = 1; i <= d; ++i) out += ",x" + std::to_string(i);
  out += ",k\n";
  for (std::size_t n = 0; n < path.times.size(); ++n) {
    out += format_double(path.times[n]);
    append_vector(out, path.states[n].x);
    out += ',' + std::to_string(path.states[n].k) + '\n';
  }
  return out;
}

std::string coupled_csv(const CoupledPathRecord& path) {
  const int d = path.first.empty() ? path.terminal_first.dim() : path.first.front().dim();
  std::string out = "t";
  for (int i = 1; i <= d; ++i) out += ",x" + std::to_string(i);
  for (int i = 1; i <= d; ++i) out += ",xt" + std::to_string(i);
  out += ",k,kt,dist\n";
  for (std::size_t n = 0; n < path.times.size(); ++n) {
    out += format_double(path.times[n]);
    append_vector(out, path.first[n].x);
    append_vector(out, path.second[n].x);
    out += ',' + std::to_string(path.first[n].k) + ',' + std::to_string(path.second[n].k) + ',' +
           format_double(path.distance[n]) + '\n';
  }
  return out;
}

std::string drift_csv(const DriftReport& report) {
  const int d = report.points.empty() ? 0 : report.points.front().state.dim();
  std::string out;
  for (int i = 1; i <= d; ++i) out += "x" + std::to_string(i) + ",";
  out += "k,generator,bracket,margin,error\n";
  for (const auto& p : report.points) {
    for (int i = 0; i < d; ++i) out += format_double(p.state.x(i)) + ",";
    std::string err = p.error;
    for (char& c : err)
      if (c == ',' || c == '\n' || c == '"') c = ' ';
    row(out, {std::to_string(p.state.k), format_double(p.generator), format_double(p.bracket),
              format_double(p.margin), err});
  }
  return out;
}

std::string event_log(const PathRecord& path, int dim, int mark_dim) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(mark_dim));
  put<std::uint64_t>(out, path.seed);
  put<std::uint64_t>(out, path.switch_events.size());
  put<std::uint64_t>(out, path.jump_events.size());
  for (const auto& e : path.switch_events) {
    put<double>(out, e.time);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.from));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.to));
  }
  for (const auto& e : path.jump_events) {
    require(e.mark.size() == mark_dim && e.displacement.size() == dim, "jump event has the wrong dimension");
    put<double>(out, e.time);
    for (int i = 0; i < mark_dim; ++i) put<double>(out, e.mark(i));
    for (int i = 0; i < dim; ++i) put<double>(out, e.displacement(i));
  }
  return out;
}

EventLog read_event_log(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw InvalidInput("not an event log (bad magic)");
  Reader r(bytes.substr(sizeof kMagic));
  EventLog log;
  log.version = r.get<std::uint32_t>();
  if (log.version != kVersion) throw InvalidInput("unsupported event log version " + std::to_string(log.version));
  log.dim = static_cast<int>(r.get<std::uint32_t>());
  log.mark_dim = static_cast<int>(r.get<std::uint32_t>());
  if (log.dim < 1 || log.dim > kMaxDim || log.mark_dim < 0 || log.mark_dim > kMaxDim)
    throw InvalidInput("event log dimensions out of range");
  log.seed = r.get<std::uint64_t>();
  const auto n_switch = r.get<std::uint64_t>();
  const auto n_jump = r.get<std::uint64_t>();
  const std::size_t need = n_switch * 16 + n_jump * 8 * (1 + log.mark_dim + log.dim);
  if (n_switch > bytes.size() || n_jump > bytes.size() || r.remaining() != need)
    throw InvalidInput("event log length does not match its header");
  log.switch_events.reserve(n_switch);
  for (std::uint64_t i = 0; i < n_switch; ++i) {
    SwitchEvent e;
    e.time = r.get<double>();
    e.from = static_cast<int>(r.get<std::uint32_t>());
    e.to = static_cast<int>(r.get<std::uint32_t>());
    log.switch_events.push_back(e);
  }
  log.jump_events.reserve(n_jump);
  for (std::uint64_t i = 0; i < n_jump; ++i) {
    JumpEvent e;
    e.time = r.get<double>();
    e.mark.resize(log.mark_dim);
    for (int j = 0; j < log.mark_dim; ++j) e.mark(j) = r.get<double>();
    e.displacement.resize(log.dim);
    for (int j = 0; j < log.dim; ++j) e.displacement(j) = r.get<double>();
    log.jump_events.push_back(std::move(e));
  }
  return log;
}

}  // namespace swjd
