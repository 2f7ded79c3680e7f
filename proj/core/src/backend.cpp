#include "atriaseg/backend.hpp"

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "atriaseg/morphology.hpp"
#include "atriaseg/nifti.hpp"
#include "atriaseg/roi.hpp"

namespace atriaseg {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

LabelMap checked(LabelMap out, const Volume& vol, const SegmentContext& ctx, const char* kind) {
  if (!out.same_geometry(vol)) {
    throw BackendError(std::string(kind) + " backend returned a map whose geometry differs from "
                       "the input for case " + ctx.case_id);
  }
  try {
    validate_labels(out, ctx.labels);
  } catch (const LabelError& e) {
    throw BackendError(std::string(kind) + " backend output for case " + ctx.case_id + ": " +
                       e.what());
  }
  return out;
}

LabelMap run_oracle(const Volume& vol, const OracleBackend& o, const SegmentContext& ctx) {
  if (o.from_ground_truth) {
    if (ctx.reference == nullptr) {
      throw BackendError("oracle backend needs ground truth for case " + ctx.case_id);
    }
    return checked(*ctx.reference, vol, ctx, "oracle");
  }
  const auto path = o.directory / substitute(o.pattern, {{"case", ctx.case_id}});
  if (!std::filesystem::exists(path)) {
    throw BackendError("oracle prediction missing: " + path.string());
  }
  try {
    return checked(read_labels(path, ctx.labels), vol, ctx, "oracle");
  } catch (const NiftiError& e) {
    throw BackendError("oracle prediction unreadable: " + std::string(e.what()));
  }
}

LabelMap run_threshold(const Volume& vol, const ThresholdBackend& t, std::uint8_t label,
                       const SegmentContext& ctx) {
  LabelMap mask = threshold_mask(vol, t.percentile);
  if (t.keep_largest) mask = keep_largest_component(mask, 1);
  for (auto& v : mask.data()) v = v ? label : 0;
  return checked(std::move(mask), vol, ctx, "threshold");
}

std::atomic<unsigned> g_temp_counter{0};

LabelMap run_external(const Volume& vol, const ExternalBackend& e, const SegmentContext& ctx) {
  namespace fs = std::filesystem;
  const fs::path dir = e.temp_dir / ("atriaseg_" + std::to_string(::getpid()) + "_" +
                                     std::to_string(g_temp_counter++) + "_" + ctx.case_id + "_" +
                                     ctx.stage);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw BackendError("cannot create temp directory " + dir.string() + ": " + ec.message());
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ignored;
      fs::remove_all(dir, ignored);
    }
  } cleanup{dir};

  const fs::path input = dir / "input.nii.gz";
  const fs::path output = dir / "output.nii.gz";
  write_volume(vol, input);
  const std::string cmd = substitute(
      e.command, {{"input", input.string()}, {"output", output.string()}, {"case", ctx.case_id}});
  const ProcessResult r = run_command(cmd, e.timeout_s);
  if (r.timed_out) {
    throw BackendError("external backend timed out after " + std::to_string(e.timeout_s) +
                       " s for case " + ctx.case_id);
  }
  if (r.exit_code != 0) {
    throw BackendError("external backend exited with status " + std::to_string(r.exit_code) +
                       " for case " + ctx.case_id);
  }
  if (!fs::exists(output)) {
    throw BackendError("external backend wrote no output for case " + ctx.case_id);
  }
  try {
    return checked(read_labels(output, ctx.labels), vol, ctx, "external");
  } catch (const NiftiError& err) {
    throw BackendError("external backend output unreadable for case " + ctx.case_id + ": " +
                       err.what());
  }
}

}  // namespace

const char* BackendSpec::kind() const {
  return std::visit(Overloaded{[](const OracleBackend&) { return "oracle"; },
                               [](const ThresholdBackend&) { return "threshold"; },
                               [](const ExternalBackend&) { return "external"; }},
                    settings);
}

void BackendSpec::validate() const {
  std::visit(Overloaded{
                 [](const OracleBackend& o) {
                   if (!o.from_ground_truth && !std::filesystem::is_directory(o.directory)) {
                     throw ConfigError("oracle directory does not exist: " + o.directory.string());
                   }
                 },
                 [](const ThresholdBackend& t) {
                   if (!(t.percentile >= 0.0 && t.percentile <= 100.0)) {
                     throw ConfigError("threshold percentile must lie in [0, 100]");
                   }
                   if (t.label == 0) throw ConfigError("threshold label must be nonzero");
                 },
                 [](const ExternalBackend& e) {
                   if (e.command.find("{input}") == std::string::npos ||
                       e.command.find("{output}") == std::string::npos) {
                     throw ConfigError(
                         "external command template must contain {input} and {output}");
                   }
                   if (!(e.timeout_s > 0.0)) throw ConfigError("external timeout must be > 0");
                 }},
             settings);
}

LabelMap segment(const Volume& vol, const BackendSpec& spec, const SegmentContext& ctx) {
  return std::visit(
      Overloaded{[&](const OracleBackend& o) { return run_oracle(vol, o, ctx); },
                 [&](const ThresholdBackend& t) { return run_threshold(vol, t, t.label, ctx); },
                 [&](const ExternalBackend& e) { return run_external(vol, e, ctx); }},
      spec.settings);
}

LabelMap coarse_segment(const Volume& vol, const BackendSpec& spec, const SegmentContext& ctx) {
  if (const auto* t = std::get_if<ThresholdBackend>(&spec.settings)) {
    SegmentContext binary = ctx;
    binary.labels = {1, 2, 3};
    return run_threshold(vol, *t, 1, binary);
  }
  return binarize(segment(vol, spec, ctx));
}

LabelMap threshold_mask(const Volume& vol, double percentile) {
  LabelMap mask(vol.dims(), vol.spacing(), 0);
  const auto [lo, hi] = intensity_range(vol);
  if (!(lo < hi)) return mask;
  const double range = static_cast<double>(hi) - lo;
  std::vector<double> norm(vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i) norm[i] = (static_cast<double>(vol[i]) - lo) / range;
  std::vector<double> sorted = norm;
  const std::size_t n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n) / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  const double cut = sorted[rank - 1];
  for (std::size_t i = 0; i < n; ++i) mask[i] = norm[i] >= cut ? 1 : 0;
  return mask;
}

std::string substitute(std::string tmpl, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    for (std::size_t pos = tmpl.find(token); pos != std::string::npos;
         pos = tmpl.find(token, pos + value.size())) {
      tmpl.replace(pos, token.size(), value);
    }
  }
  return tmpl;
}

ProcessResult run_command(const std::string& command, double timeout_s) {
  ProcessResult result;
  const pid_t pid = ::fork();
  if (pid < 0) throw BackendError("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  int status = 0;
  for (;;) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) throw BackendError("waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      result.timed_out = true;
      return result;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

}  // namespace atriaseg
