#include "xsched/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>
#include <sstream>

namespace xsched {

namespace {

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw CheckpointError(CheckpointError::Reason::Format, "checkpoint: bad integer list '" + s + "'");
    }
  }
  return out;
}

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double get_f64(std::string_view in, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]);
  return std::bit_cast<double>(bits);
}

std::string payload(const ActorCritic& net) {
  std::string out;
  out.reserve(static_cast<std::size_t>(8 * (net.actor.parameter_count() + net.critic.parameter_count())));
  for (const Mlp* m : {&net.actor, &net.critic}) {
    const Eigen::VectorXd flat = flatten(*m);
    for (Eigen::Index i = 0; i < flat.size(); ++i) put_f64(out, flat(i));
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t parameter_checksum(const ActorCritic& net) { return fnv1a64(payload(net)); }

std::string serialize(const Checkpoint& ckpt) {
  const auto& net = ckpt.net;
  std::ostringstream head;
  head << "xsched-checkpoint\n"
       << "version=" << kCheckpointVersion << "\n"
       << "kind=" << ckpt.kind << "\n"
       << "head_sizes=" << join(net.head_sizes) << "\n"
       << "actor_dims=" << join(net.actor.dimensions()) << "\n"
       << "critic_dims=" << join(net.critic.dimensions()) << "\n"
       << "learning_rate=" << fmt(ckpt.hyper.learning_rate) << "\n"
       << "discount=" << fmt(ckpt.hyper.discount) << "\n"
       << "value_weight=" << fmt(ckpt.hyper.value_weight) << "\n"
       << "clip_norm=" << fmt(ckpt.hyper.clip_norm) << "\n"
       << "adam_beta1=" << fmt(ckpt.hyper.adam_beta1) << "\n"
       << "adam_beta2=" << fmt(ckpt.hyper.adam_beta2) << "\n"
       << "adam_epsilon=" << fmt(ckpt.hyper.adam_epsilon) << "\n"
       << "advantage_mode=" << to_string(ckpt.hyper.advantage_mode) << "\n"
       << "episodes=" << ckpt.episodes << "\n"
       << "seed=" << ckpt.seed << "\n"
       << "payload_f64=" << (net.actor.parameter_count() + net.critic.parameter_count()) << "\n"
       << "end\n";
  return head.str() + payload(net);
}

Checkpoint deserialize(std::string_view bytes) {
  using Reason = CheckpointError::Reason;
  std::size_t at = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', at);
    if (nl == std::string_view::npos) throw CheckpointError(Reason::Format, "checkpoint: truncated manifest");
    std::string line(bytes.substr(at, nl - at));
    at = nl + 1;
    return line;
  };
  if (next_line() != "xsched-checkpoint") throw CheckpointError(Reason::Format, "checkpoint: bad magic line");

  std::map<std::string, std::string> fields;
  for (std::string line = next_line(); line != "end"; line = next_line()) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError(Reason::Format, "checkpoint: bad manifest line '" + line + "'");
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto field = [&](const std::string& k) -> const std::string& {
    const auto it = fields.find(k);
    if (it == fields.end()) throw CheckpointError(Reason::Format, "checkpoint: missing manifest field '" + k + "'");
    return it->second;
  };
  auto number = [&](const std::string& k) {
    try {
      return std::stod(field(k));
    } catch (const CheckpointError&) {
      throw;
    } catch (const std::exception&) {
      throw CheckpointError(Reason::Format, "checkpoint: bad number in field '" + k + "'");
    }
  };

  if (field("version") != std::to_string(kCheckpointVersion))
    throw CheckpointError(Reason::Version, "checkpoint: unsupported version " + field("version") + " (expected " +
                                               std::to_string(kCheckpointVersion) + ")");

  Checkpoint ckpt;
  ckpt.kind = field("kind");
  ckpt.hyper.learning_rate = number("learning_rate");
  ckpt.hyper.discount = number("discount");
  ckpt.hyper.value_weight = number("value_weight");
  ckpt.hyper.clip_norm = number("clip_norm");
  ckpt.hyper.adam_beta1 = number("adam_beta1");
  ckpt.hyper.adam_beta2 = number("adam_beta2");
  ckpt.hyper.adam_epsilon = number("adam_epsilon");
  ckpt.hyper.advantage_mode =
      field("advantage_mode") == "one_step" ? AdvantageMode::OneStep : AdvantageMode::FullReturn;
  ckpt.episodes = static_cast<long long>(number("episodes"));
  try {
    ckpt.seed = std::stoull(field("seed"));
  } catch (const std::exception&) {
    throw CheckpointError(Reason::Format, "checkpoint: bad seed");
  }

  const auto actor_dims = split_ints(field("actor_dims"));
  const auto critic_dims = split_ints(field("critic_dims"));
  try {
    ckpt.net.actor = mlp_zeros<double>(actor_dims);
    ckpt.net.critic = mlp_zeros<double>(critic_dims);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Reason::Format, std::string("checkpoint: ") + e.what());
  }
  ckpt.net.head_sizes = split_ints(field("head_sizes"));
  ckpt.hyper.hidden_layers = static_cast<int>(actor_dims.size()) - 2;
  ckpt.hyper.hidden_units = actor_dims.size() > 2 ? actor_dims[1] : 0;

  const auto declared = static_cast<std::size_t>(number("payload_f64"));
  const auto expected = static_cast<std::size_t>(ckpt.net.actor.parameter_count() + ckpt.net.critic.parameter_count());
  if (declared != expected)
    throw CheckpointError(Reason::CorruptLength, "checkpoint: manifest declares " + std::to_string(declared) +
                                                     " values but layer dimensions need " + std::to_string(expected));
  if (bytes.size() - at != 8 * expected)
    throw CheckpointError(Reason::CorruptLength, "checkpoint: payload has " + std::to_string(bytes.size() - at) +
                                                     " bytes, expected " + std::to_string(8 * expected));
  for (Mlp* m : {&ckpt.net.actor, &ckpt.net.critic}) {
    Eigen::VectorXd flat(m->parameter_count());
    for (Eigen::Index i = 0; i < flat.size(); ++i, at += 8) flat(i) = get_f64(bytes, at);
    unflatten(*m, flat);
  }
  return ckpt;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Reason::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Reason::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Reason::Io, "short write to " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) { write_file(path, serialize(ckpt)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace xsched
