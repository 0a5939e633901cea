// kgcmlp: key exchange, sweeps, attacker runs and golden vectors.
// Exit codes: 0 success, 1 runtime or protocol failure, 2 usage.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "kgcmlp/kgcmlp.hpp"

using namespace kgcmlp;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Common {
  int k = 3;
  int n = 32;
  int l = 3;
  std::string rule = "random-walk";
  std::string seed_hex;
};

struct ExchangeArgs {
  std::string st = "000102030405060708090a0b0c0d0e0f";
  std::string ssc = "5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a";
  std::string rsc = "a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5";
  bool corrupt_ssc = false;
  bool corrupt_rsc = false;
  bool preshared = false;
  std::string sync_check = "digest";
  std::uint32_t timeout = 500;
  std::uint32_t attempts = 5;
  std::uint64_t max_rounds = 1'000'000;
  ChannelConfig channel;
  std::string listen;
  std::string connect;
  int frames = 3;
};

struct SweepArgs {
  std::string vary = "l";
  int from = 1;
  int to = 6;
  std::uint64_t trials = 200;
  std::uint64_t cap = 1'000'000;
  std::vector<int> values;  // overrides from/to when given
  std::string mode = "direct";
  std::string out;
};

// Hex seed, or a random one that is printed so the run can be repeated.
RngState master_seed(const std::string& hex) {
  Seed128 seed{};
  if (hex.empty()) {
    std::random_device rd;
    for (auto& b : seed) b = static_cast<std::uint8_t>(rd());
    std::cout << "seed: " << to_hex(seed) << " (defaulted)\n";
  } else {
    seed = block_from_hex(hex);
  }
  return seed_from_bytes(seed);
}

std::filesystem::path output_path(const std::string& given, const char* fallback_name) {
  if (!given.empty()) return given;
  const char* dir = std::getenv("KGCMLP_OUT_DIR");
  return std::filesystem::path(dir && *dir ? dir : ".") / fallback_name;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw TransportError("cannot open " + path.string() + " for writing");
  return os;
}

LearningRule rule_of(const std::string& name) { return *parse_rule(name); }

ProtocolConfig protocol_of(const Common& c, const ExchangeArgs& e) {
  ProtocolConfig cfg;
  cfg.params = TpmParams{c.k, c.n, c.l, 1, 0};
  cfg.rule = rule_of(c.rule);
  cfg.st = block_from_hex(e.st);
  cfg.ssc = block_from_hex(e.ssc);
  cfg.rsc = block_from_hex(e.rsc);
  cfg.timeout_ticks = e.timeout;
  cfg.max_attempts = e.attempts;
  cfg.sync_check = e.sync_check == "first-block" ? SyncCheck::FirstBlock : SyncCheck::Digest;
  if (e.preshared) {
    cfg.seed_mode = SeedMode::PreShared;
    cfg.preshared_seed = block_from_hex(c.seed_hex.empty() ? e.st : c.seed_hex);
  }
  cfg.validate();
  return cfg;
}

void print_key(const char* who, const std::optional<SessionKey>& key) {
  if (key)
    std::cout << who << " key: " << to_hex(key->key) << " iv " << static_cast<unsigned>(key->iv) << "\n";
  else
    std::cout << who << " key: none\n";
}

// Data phase demo: per-frame keys from fresh public seeds.
void demo_frames(const TpmNetwork& a, const TpmNetwork& b, RngState rng, int frames) {
  Block128 message{};
  const std::string text = "per-frame secret";
  std::copy(text.begin(), text.end(), message.begin());
  for (int i = 0; i < frames; ++i) {
    const Seed128 seed = random_seed(rng);
    const Block128 ka = frame_key(a, seed);
    const Block128 kb = frame_key(b, seed);
    const Block128 c = otp_transform(ka, message);
    const Block128 p = otp_transform(kb, c);
    std::cout << "frame " << i << ": seed " << to_hex(seed) << " key " << to_hex(ka) << " cipher " << to_hex(c)
              << " decrypts: " << (p == message ? "yes" : "no") << "\n";
  }
}

int run_exchange_simulated(const Common& c, const ExchangeArgs& e) {
  RngState master = master_seed(c.seed_hex);
  ExchangeOptions opt;
  opt.protocol = protocol_of(c, e);
  ProtocolConfig receiver = opt.protocol;
  // The corruption flags alter the verifying side's copy of the code.
  if (e.corrupt_ssc) receiver.ssc[0] ^= 0x01;
  if (e.corrupt_rsc) opt.protocol.rsc[0] ^= 0x01;
  opt.receiver_protocol = receiver;
  opt.sender_rng = derive_stream(master, 0);
  opt.receiver_rng = derive_stream(master, 1);
  opt.channel = e.channel;
  if (opt.channel.rng_seed == 0) opt.channel.rng_seed = take_word(master);
  opt.max_rounds = e.max_rounds;
  const ExchangeReport rep = run_exchange(opt);

  std::cout << "sender: " << to_string(rep.sender_phase) << ", receiver: " << to_string(rep.receiver_phase) << "\n";
  print_key("sender", rep.sender_key);
  print_key("receiver", rep.receiver_key);
  std::cout << "iterations: " << rep.rounds << "\n"
            << "bytes: " << rep.bytes_exchanged << "\n"
            << "frames dropped " << rep.channel.frames_dropped << ", corrupted " << rep.channel.corrupted_delivered
            << ", rejected by CRC " << rep.crc_rejections << ", stale " << rep.stale_frames << "\n";
  if (!rep.established()) {
    std::cout << "keys match: no\n";
    std::cerr << "exchange failed: " << (rep.failure.empty() ? "not established" : rep.failure) << "\n";
    return kExitFailure;
  }
  std::cout << "keys match: yes\n";
  demo_frames(rep.sender.net, rep.receiver.net, derive_stream(master, 2), e.frames);
  return 0;
}

int run_exchange_udp(const Common& c, const ExchangeArgs& e) {
  const RngState master = master_seed(c.seed_hex);
  ProtocolConfig cfg = protocol_of(c, e);
  UdpRunResult res;
  if (!e.listen.empty()) {
    if (e.corrupt_ssc) cfg.ssc[0] ^= 0x01;
    UdpSocket sock(parse_udp_address(e.listen));
    std::cout << "listening on port " << sock.local_port() << "\n" << std::flush;
    res = run_udp_receiver(sock, cfg, derive_stream(master, 1), 30'000, 2'000);
  } else {
    if (e.corrupt_rsc) cfg.rsc[0] ^= 0x01;
    UdpSocket sock(UdpAddress{"0.0.0.0", 0});
    sock.connect_peer(parse_udp_address(e.connect));
    res = run_udp_sender(sock, cfg, derive_stream(master, 0), e.max_rounds);
  }
  std::cout << "phase: " << to_string(res.phase) << "\n";
  print_key("local", res.key);
  std::cout << "iterations: " << res.rounds << "\n" << "bytes sent: " << res.bytes_sent << "\n";
  if (res.phase != Phase::Established) {
    std::cerr << "exchange failed: " << res.failure << "\n";
    return kExitFailure;
  }
  return 0;
}

int run_sweep(const Common& c, const SweepArgs& s, bool attack) {
  const RngState master = master_seed(c.seed_hex);
  const auto path = output_path(s.out, attack ? "attack.csv" : "sweep.csv");
  std::ofstream os = open_output(path);
  os << kSweepCsvHeader << "\n";
  TrialOptions opt;
  opt.mode = s.mode == "protocol" ? TrialMode::Protocol : TrialMode::Direct;
  opt.iteration_cap = s.cap;
  std::vector<int> points = s.values;
  if (points.empty())
    for (int v = s.from; v <= s.to; ++v) points.push_back(v);
  for (const int v : points) {
    TpmParams p{c.k, c.n, c.l, 1, 0};
    (s.vary == "l" ? p.l : p.n) = v;
    const RngState point = derive_stream(master, static_cast<std::uint64_t>(v));
    const SweepResult r = attack ? run_attack_trials(p, rule_of(c.rule), s.trials, point, s.cap)
                                 : run_sync_trials(p, rule_of(c.rule), s.trials, point, opt);
    write_csv_row(os, r);
    std::cout << s.vary << "=" << v << " mean " << r.mean_iterations << " synced " << r.synced_trials << "/"
              << r.trials;
    if (r.attacker_success) std::cout << " attacker success " << *r.attacker_success;
    std::cout << "\n";
  }
  if (!os.flush()) throw TransportError("write failed: " + path.string());
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int run_vectors(const std::string& out) {
  const auto path = output_path(out, "golden_vectors.txt");
  std::ofstream os = open_output(path);
  write_golden_vectors(os);
  if (!os.flush()) throw TransportError("write failed: " + path.string());
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--k", c.k, "hidden units")->check(CLI::PositiveNumber);
  app->add_option("--n", c.n, "inputs per hidden unit")->check(CLI::PositiveNumber);
  app->add_option("--l", c.l, "weight bound")->check(CLI::Range(0, 127));
  app->add_option("--rule", c.rule, "learning rule")->check(CLI::IsMember({"hebbian", "anti-hebbian", "random-walk"}));
  const auto hex32 = CLI::Validator(
      [](std::string& v) -> std::string {
        if (v.size() != 32 || v.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
          return "expected 32 hex digits";
        return {};
      },
      "HEX32");
  app->add_option("--seed", c.seed_hex, "master seed, 32 hex digits (random and printed when omitted)")->check(hex32);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural key generation and certification over a frame protocol"};
  app.require_subcommand(1);

  Common common;
  ExchangeArgs ex;
  SweepArgs sw;
  std::string vectors_out;

  auto* exchange = app.add_subcommand("exchange", "run a key exchange (simulated link or UDP)");
  add_common(exchange, common);
  exchange->add_option("--st", ex.st, "public test plaintext (hex)");
  exchange->add_option("--ssc", ex.ssc, "sender secret code (hex)");
  exchange->add_option("--rsc", ex.rsc, "receiver secret code (hex)");
  exchange->add_flag("--corrupt-ssc", ex.corrupt_ssc, "flip a bit of the receiver's copy of SSC");
  exchange->add_flag("--corrupt-rsc", ex.corrupt_rsc, "flip a bit of the sender's copy of RSC");
  exchange->add_flag("--preshared", ex.preshared, "derive round inputs from a shared seed (the --seed value)");
  exchange->add_option("--sync-check", ex.sync_check, "synchronization test key")
      ->check(CLI::IsMember({"digest", "first-block"}));
  exchange->add_option("--timeout", ex.timeout, "retransmission timeout in ticks")->check(CLI::PositiveNumber);
  exchange->add_option("--attempts", ex.attempts, "attempts per frame")->check(CLI::PositiveNumber);
  exchange->add_option("--max-rounds", ex.max_rounds, "give up after this many rounds");
  exchange->add_option("--drop", ex.channel.drop_prob, "drop probability")->check(CLI::Range(0.0, 1.0));
  exchange->add_option("--dup", ex.channel.dup_prob, "duplication probability")->check(CLI::Range(0.0, 1.0));
  exchange->add_option("--corrupt", ex.channel.corrupt_prob, "bit corruption probability")->check(CLI::Range(0.0, 1.0));
  exchange->add_option("--reorder", ex.channel.reorder_prob, "reorder probability")->check(CLI::Range(0.0, 1.0));
  exchange->add_option("--latency", ex.channel.latency_ticks, "link latency in ticks");
  exchange->add_option("--channel-seed", ex.channel.rng_seed, "link impairment seed (0: from the master seed)");
  exchange->add_option("--frames", ex.frames, "per-frame keys to demonstrate")->check(CLI::NonNegativeNumber);
  auto* listen = exchange->add_option("--listen", ex.listen, "run the receiver on host:port");
  auto* connect = exchange->add_option("--connect", ex.connect, "run the sender against host:port");
  listen->excludes(connect);

  auto add_sweep = [&](CLI::App* sub, int default_from, int default_to, const char* file) {
    add_common(sub, common);
    sub->add_option("--vary", sw.vary, "parameter to sweep")->check(CLI::IsMember({"l", "n"}));
    sub->add_option("--from", sw.from, "first value")->default_val(default_from);
    sub->add_option("--to", sw.to, "last value")->default_val(default_to);
    sub->add_option("--values", sw.values, "explicit comma-separated values")->delimiter(',');
    sub->add_option("--trials", sw.trials, "trials per point")->check(CLI::PositiveNumber);
    sub->add_option("--cap", sw.cap, "iteration cap per trial")->check(CLI::PositiveNumber);
    sub->add_option("--out", sw.out, std::string("CSV path (default $KGCMLP_OUT_DIR/") + file + ")");
  };
  auto* sweep = app.add_subcommand("sweep", "synchronization time statistics over l or n");
  add_sweep(sweep, 1, 6, "sweep.csv");
  sweep->add_option("--mode", sw.mode, "direct networks or full protocol")->check(CLI::IsMember({"direct", "protocol"}));
  auto* attack = app.add_subcommand("attack", "passive attacker success over l or n");
  add_sweep(attack, 1, 5, "attack.csv");

  auto* vectors = app.add_subcommand("vectors", "write generator and frame golden vectors");
  vectors->add_option("--out", vectors_out, "output path (default $KGCMLP_OUT_DIR/golden_vectors.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (exchange->parsed()) {
      return ex.listen.empty() && ex.connect.empty() ? run_exchange_simulated(common, ex)
                                                     : run_exchange_udp(common, ex);
    }
    if (sweep->parsed() || attack->parsed()) {
      if (sw.from > sw.to) {
        std::cerr << "--from must not exceed --to\n";
        return kExitUsage;
      }
      if (sw.vary == "n" && !sweep->count("--l") && !attack->count("--l")) common.l = 5;
      return run_sweep(common, sw, attack->parsed());
    }
    return run_vectors(vectors_out);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
