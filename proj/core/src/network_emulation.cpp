#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "xrteleop/simrobot.hpp"

namespace xrt {
namespace {

double number(std::string_view text, std::string_view spec) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, "bad number '" + std::string(text) + "' in '" + std::string(spec) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  for (;;) {
    const auto pos = text.find(sep);
    parts.push_back(text.substr(0, pos));
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  return parts;
}

}  // namespace

NetworkEmulation NetworkEmulation::parse(std::string_view spec) {
  NetworkEmulation e;
  const auto options = split(spec, ',');
  const auto delay = split(options[0], ':');
  if (delay[0] == "constant" && delay.size() == 2) {
    e.delay = Delay::Constant;
    e.a_ms = e.b_ms = number(delay[1], spec);
  } else if (delay[0] == "uniform" && delay.size() == 3) {
    e.delay = Delay::Uniform;
    e.a_ms = number(delay[1], spec);
    e.b_ms = number(delay[2], spec);
  } else {
    throw Error(ErrorCode::InvalidArgument, "delay must be constant:<ms> or uniform:<a>:<b>, got '" +
                                                std::string(spec) + "'");
  }
  for (std::size_t i = 1; i < options.size(); ++i) {
    const auto kv = split(options[i], '=');
    if (kv.size() != 2) throw Error(ErrorCode::InvalidArgument, "bad option '" + std::string(options[i]) + "'");
    if (kv[0] == "drop") {
      e.drop_probability = number(kv[1], spec);
    } else if (kv[0] == "seed") {
      std::uint64_t seed = 0;
      const auto [ptr, ec] = std::from_chars(kv[1].data(), kv[1].data() + kv[1].size(), seed);
      if (ec != std::errc() || ptr != kv[1].data() + kv[1].size()) {
        throw Error(ErrorCode::InvalidArgument, "bad seed in '" + std::string(spec) + "'");
      }
      e.seed = seed;
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown option '" + std::string(kv[0]) + "'");
    }
  }
  e.validate();
  return e;
}

std::string NetworkEmulation::to_string() const {
  std::string out = delay == Delay::Constant ? fmt::format("constant:{}", a_ms) : fmt::format("uniform:{}:{}", a_ms, b_ms);
  return out + fmt::format(",drop={},seed={}", drop_probability, seed);
}

void NetworkEmulation::validate() const {
  if (a_ms < 0.0 || b_ms < a_ms) throw Error(ErrorCode::InvalidArgument, "delay range must satisfy 0 <= a <= b");
  if (!(drop_probability >= 0.0 && drop_probability < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "drop probability must be in [0, 1)");
  }
}

NetworkChannel::NetworkChannel(const NetworkEmulation& emulation) : emulation_(emulation), rng_(emulation.seed) {
  emulation_.validate();
}

double NetworkChannel::uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

std::optional<std::int64_t> NetworkChannel::next_delay_ns() {
  const double drop = uniform01();
  const double u = uniform01();
  if (drop < emulation_.drop_probability) return std::nullopt;
  const double ms = emulation_.delay == NetworkEmulation::Delay::Constant
                        ? emulation_.a_ms
                        : emulation_.a_ms + (emulation_.b_ms - emulation_.a_ms) * u;
  return std::llround(ms * 1e6);
}

}  // namespace xrt
