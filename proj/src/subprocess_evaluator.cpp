#include "placeopt/subprocess_evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "placeopt/error.hpp"

namespace placeopt {

SubprocessEvaluator::SubprocessEvaluator(std::string command, MixerCatalog catalog, bool noisy)
    : command_(std::move(command)), catalog_(std::move(catalog)), noisy_(noisy) {
  if (command_.empty()) throw ValidationError("evaluator command is empty");
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

struct TempFile {
  std::string path;
  TempFile() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "placeopt-XXXXXX").string();
    const int fd = ::mkstemp(tmpl.data());
    if (fd < 0) throw EvaluatorError("cannot create a temporary file for the evaluator");
    ::close(fd);
    path = tmpl;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

std::vector<double> SubprocessEvaluator::evaluate(std::span<const Placement> placements) {
  if (placements.empty()) return {};
  TempFile input;
  {
    std::ofstream out(input.path);
    for (const auto& p : placements) out << to_code_string(p, catalog_) << '\n';
    if (!out) throw EvaluatorError("cannot write evaluator input");
  }
  const std::string cmd = "(" + command_ + ") < " + shell_quote(input.path);
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw EvaluatorError("cannot start evaluator: " + command_);

  std::string output;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, got);
  const int status = ::pclose(pipe);
  if (status != 0) throw EvaluatorError("evaluator exited with status " + std::to_string(status) + ": " + command_);

  std::vector<double> scores;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < output.size()) {
    std::size_t end = output.find('\n', pos);
    if (end == std::string::npos) end = output.size();
    const std::string line = output.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    char* stop = nullptr;
    const double v = std::strtod(line.c_str(), &stop);
    while (stop != nullptr && (*stop == ' ' || *stop == '\t' || *stop == '\r')) ++stop;
    if (stop == line.c_str() || (stop != nullptr && *stop != '\0') || !std::isfinite(v))
      throw EvaluatorError("evaluator output line " + std::to_string(lineno) + " is not a finite number: '" + line + "'");
    scores.push_back(v);
  }
  if (scores.size() != placements.size())
    throw EvaluatorError("evaluator returned " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(placements.size()) + " placements");
  return scores;
}

}  // namespace placeopt
