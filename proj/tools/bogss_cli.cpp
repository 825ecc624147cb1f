// bogss: block-online guided source separation from the command line.
//
//   bogss run [--mode online|offline] --segments SEG --out DIR [--report PATH]
//             [--refs DIR] (INPUT.wav | --ch A.wav --ch B.wav ...)
//   bogss bench (--seed N ... | INPUT.wav --segments SEG)
//   bogss generate --out DIR [--seed N ...]

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>

#include "bogss/eval.hpp"
#include "bogss/kernels.hpp"
#include "bogss/pipeline.hpp"
#include "bogss/wav.hpp"

namespace fs = std::filesystem;
using namespace bogss;

namespace {

struct RunOptions {
  std::string mode = "online";
  std::size_t block_frames = 150;
  std::size_t context_frames = 150;
  std::string strategy = "decay";
  double eta = 0.9;
  double offline_context_sec = 10.0;
  std::size_t em_iterations = 20;
  std::size_t threads = 1;
  std::string segments, out_dir, report, refs, input;
  std::vector<std::string> channels;
};

struct SceneOptions {
  std::uint64_t seed = 1;
  std::size_t speakers = 2, channels = 4;
  double duration = 120.0, overlap = 0.3, snr = 15.0;
  bool moving = false;
};

void add_algorithm_options(CLI::App& app, RunOptions& o) {
  app.add_option("--block-frames", o.block_frames, "Block length L in frames")->check(CLI::PositiveNumber);
  app.add_option("--context-frames", o.context_frames, "Pre-context length C in frames");
  app.add_option("--strategy", o.strategy, "Shape update strategy")
      ->check(CLI::IsMember({"accumulation", "decay"}));
  app.add_option("--eta", o.eta, "Decay factor in [0, 1)");
  app.add_option("--offline-context-sec", o.offline_context_sec, "Offline context on each side (s)");
  app.add_option("--em-iterations", o.em_iterations, "Offline EM iterations")->check(CLI::PositiveNumber);
  app.add_option("--threads", o.threads, "Worker threads for per-frequency loops")->check(CLI::PositiveNumber);
}

OnlineConfig online_config(const RunOptions& o) {
  OnlineConfig c;
  c.block_len_frames = o.block_frames;
  c.context_len_frames = o.context_frames;
  c.strategy = o.strategy == "accumulation" ? Strategy::accumulation : Strategy::decay;
  c.eta = o.eta;
  c.threads = o.threads;
  c.validate();
  return c;
}

OfflineConfig offline_config(const RunOptions& o) {
  OfflineConfig c;
  c.context_sec = o.offline_context_sec;
  c.em_iterations = o.em_iterations;
  c.threads = o.threads;
  c.validate();
  return c;
}

void require_rate(const WavData& w, const std::string& path) {
  if (w.sample_rate_hz != 16000)
    throw Error(path + ": sample rate " + std::to_string(w.sample_rate_hz) +
                " Hz is not supported (16000 Hz required)");
}

MultiSignal load_input(const RunOptions& o) {
  if (!o.input.empty() && !o.channels.empty()) throw Error("give either an input WAV or --ch files, not both");
  MultiSignal audio;
  if (!o.input.empty()) {
    if (!fs::exists(o.input)) throw Error("input not found: " + o.input);
    auto w = read_wav(o.input);
    require_rate(w, o.input);
    audio = std::move(w.channels);
  } else {
    for (const auto& path : o.channels) {
      if (!fs::exists(path)) throw Error("input not found: " + path);
      auto w = read_wav(path);
      require_rate(w, path);
      if (w.channels.size() != 1) throw Error(path + ": --ch inputs must be mono");
      if (!audio.empty() && w.channels[0].size() != audio[0].size())
        throw Error(path + ": length differs from the other channels");
      audio.push_back(std::move(w.channels[0]));
    }
  }
  if (audio.empty()) throw Error("no input audio given");
  if (audio.size() < 2) throw Error("at least two channels are required, got " + std::to_string(audio.size()));
  return audio;
}

RunResult execute(const std::string& mode, const MultiSignal& audio, const SegmentList& segments,
                  const RunOptions& o) {
  const OnlineConfig online = online_config(o);
  if (mode == "online") {
    GuardedAudioSource source(audio);
    return run_online(source, segments, online);
  }
  return run_offline(audio, segments, online, offline_config(o));
}

int cmd_run(const RunOptions& o) {
  if (!fs::exists(o.segments)) throw Error("segments file not found: " + o.segments);
  const SegmentList segments = parse_segments_file(o.segments);
  const MultiSignal audio = load_input(o);
  const RunResult result = execute(o.mode, audio, segments, o);
  RunReport report = make_report(result, o.mode);

  if (!o.out_dir.empty()) {
    fs::create_directories(o.out_dir);
    for (std::size_t i = 0; i < result.utterances.size(); ++i) {
      const auto path = (fs::path(o.out_dir) / utterance_file_name(result.utterances[i])).string();
      write_wav(path, {result.utterances[i].audio}, 16000);
      report.records[i].path = path;
    }
  }
  if (!o.refs.empty()) {
    if (!fs::is_directory(o.refs)) throw Error("reference directory not found: " + o.refs);
    const StftConfig stft;
    std::map<std::string, SpectralBlock> refs;
    for (const auto& u : result.utterances) {
      if (refs.count(u.speaker)) continue;
      const auto path = fs::path(o.refs) / (u.speaker + ".wav");
      if (!fs::exists(path)) continue;
      auto w = read_wav(path.string());
      require_rate(w, path.string());
      refs.emplace(u.speaker, analyze(w.channels, stft));
    }
    const auto scores = score_utterances(result, refs, analyze(audio, stft), stft);
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (scores[i]) {
        report.records[i].si_sdr_db = scores[i]->enhanced_db;
        report.records[i].mixture_si_sdr_db = scores[i]->mixture_db;
      }
  }
  if (o.report.empty()) {
    report.write(std::cout);
  } else {
    std::ofstream out(o.report);
    if (!out) throw Error("cannot write report " + o.report);
    report.write(out);
  }
  return 0;
}

SceneSpec scene_spec(const SceneOptions& s) {
  SceneSpec spec;
  spec.seed = s.seed;
  spec.num_speakers = s.speakers;
  spec.num_channels = s.channels;
  spec.duration_sec = s.duration;
  spec.overlap_ratio = s.overlap;
  spec.snr_db = std::isfinite(s.snr) ? s.snr : SceneSpec::kNoNoise;
  spec.moving = s.moving;
  return spec;
}

int cmd_bench(RunOptions o, const SceneOptions& s, bool use_scene) {
  MultiSignal audio;
  SegmentList segments;
  if (use_scene) {
    Scene scene = generate_scene(scene_spec(s));
    audio = std::move(scene.mixture);
    segments = std::move(scene.segments);
  } else {
    if (!fs::exists(o.segments)) throw Error("segments file not found: " + o.segments);
    segments = parse_segments_file(o.segments);
    audio = load_input(o);
  }
  o.threads = 1;
  const RunResult online = execute("online", audio, segments, o);
  const RunResult offline = execute("offline", audio, segments, o);
  std::ostringstream out;
  out.precision(10);
  out << "kernels=" << kernels::active().name << '\n'
      << "audio_duration_sec=" << online.audio_sec << '\n'
      << "speech_duration_sec=" << online.speech_sec << '\n'
      << "online_processing_sec=" << online.processing_sec << '\n'
      << "online_real_time_factor=" << online.real_time_factor() << '\n'
      << "online_lookahead_violations=" << online.lookahead_violations << '\n'
      << "offline_processing_sec=" << offline.processing_sec << '\n'
      << "offline_real_time_factor=" << offline.real_time_factor() << '\n'
      << "speedup=" << offline.processing_sec / online.processing_sec << '\n'
      << "utterances_online=" << online.utterances.size() << '\n'
      << "utterances_offline=" << offline.utterances.size() << '\n';
  std::cout << out.str();
  return 0;
}

int cmd_generate(const SceneOptions& s, const std::string& out_dir) {
  const Scene scene = generate_scene(scene_spec(s));
  fs::create_directories(fs::path(out_dir) / "refs");
  write_wav((fs::path(out_dir) / "mixture.wav").string(), scene.mixture, 16000);
  std::ofstream seg((fs::path(out_dir) / "segments.txt").string());
  if (!seg) throw Error("cannot write segments to " + out_dir);
  write_segments(seg, scene.segments);
  for (std::size_t k = 0; k < scene.labels.size(); ++k)
    write_wav((fs::path(out_dir) / "refs" / (scene.labels[k] + ".wav")).string(), scene.images[k], 16000);
  std::cout << "utterances=" << scene.segments.size() << '\n'
            << "overlap_ratio=" << measure_overlap_ratio(scene.segments) << '\n';
  return 0;
}

void add_scene_options(CLI::App& app, SceneOptions& s) {
  app.add_option("--seed", s.seed, "Scene seed");
  app.add_option("--speakers", s.speakers, "Number of speakers (2-4)");
  app.add_option("--channels", s.channels, "Number of microphones (2-8)");
  app.add_option("--duration", s.duration, "Scene length in seconds");
  app.add_option("--overlap", s.overlap, "Overlap ratio target");
  app.add_option("--snr", s.snr, "SNR in dB (inf for no noise)");
  app.add_flag("--moving", s.moving, "Drift the source delays");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-online guided source separation"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Enhance every annotated utterance of a recording");
  run_cmd->add_option("--mode", run.mode, "online or offline")->check(CLI::IsMember({"online", "offline"}));
  add_algorithm_options(*run_cmd, run);
  run_cmd->add_option("--segments", run.segments, "Segment file: `speaker start end` per line")->required();
  run_cmd->add_option("--out", run.out_dir, "Directory for enhanced utterance WAVs");
  run_cmd->add_option("--report", run.report, "Report path (default: stdout)");
  run_cmd->add_option("--refs", run.refs, "Directory of <speaker>.wav references for SI-SDR");
  run_cmd->add_option("--ch", run.channels, "Mono WAV per channel (repeatable)");
  run_cmd->add_option("input", run.input, "Multichannel 16 kHz 16-bit WAV");

  RunOptions bench;
  SceneOptions bench_scene;
  auto* bench_cmd = app.add_subcommand("bench", "Time online against offline, single-threaded");
  add_algorithm_options(*bench_cmd, bench);
  add_scene_options(*bench_cmd, bench_scene);
  bench_cmd->add_option("--segments", bench.segments, "Segment file (with an input WAV)");
  bench_cmd->add_option("--ch", bench.channels, "Mono WAV per channel (repeatable)");
  bench_cmd->add_option("input", bench.input, "Multichannel WAV instead of a generated scene");

  SceneOptions gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic scene: mixture, segments, references");
  add_scene_options(*gen_cmd, gen);
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(run);
    if (*bench_cmd) return cmd_bench(bench, bench_scene, bench.input.empty() && bench.channels.empty());
    if (*gen_cmd) return cmd_generate(gen, gen_out);
  } catch (const std::exception& e) {
    std::cerr << "bogss: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
