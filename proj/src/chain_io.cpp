#include "cltlab/chain_io.hpp"

#include <fstream>
#include <sstream>

#include "cltlab/chain.hpp"

namespace cltlab {

namespace {

// Tokenizes after dropping '#' comments; "labels:" and "V:" stay single
// tokens.
std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string w;
    while (words >> w) tokens.push_back(w);
  }
  return tokens;
}

double parse_real(const std::string& token, const char* what) {
  try {
    std::size_t used = 0;
    const double value = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError,
                std::string("expected a number for ") + what + ", got '" +
                    token + "'");
  }
}

}  // namespace

FiniteChain parse_chain_text(const std::string& text) {
  const std::vector<std::string> tokens = tokenize(text);
  std::size_t pos = 0;
  auto next = [&](const char* what) -> const std::string& {
    if (pos >= tokens.size())
      throw Error(ErrorCode::ParseError,
                  std::string("unexpected end of input, expected ") + what);
    return tokens[pos++];
  };

  const int n = static_cast<int>(parse_real(next("state count"), "n"));
  if (n <= 0) throw Error(ErrorCode::ParseError, "state count must be > 0");
  Matrix P(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      P(i, j) = parse_real(next("transition probability"), "P entry");

  std::optional<Matrix> labels;
  std::optional<Vector> V;
  while (pos < tokens.size()) {
    const std::string block = next("block header");
    if (block == "labels:") {
      Matrix L(n, 1);
      for (int i = 0; i < n; ++i)
        L(i, 0) = parse_real(next("label"), "label");
      labels = std::move(L);
    } else if (block == "V:") {
      Vector w(n);
      for (int i = 0; i < n; ++i) w[i] = parse_real(next("V value"), "V");
      V = std::move(w);
    } else {
      throw Error(ErrorCode::ParseError,
                  "unknown block '" + block + "' (expected labels: or V:)");
    }
  }
  return validate_chain(P, std::move(labels), std::move(V));
}

FiniteChain read_chain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_chain_text(buffer.str());
}

std::string format_chain_text(const FiniteChain& chain) {
  std::ostringstream out;
  out.precision(17);
  const int n = chain.n_states();
  out << n << "\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out << (j ? " " : "") << chain.P(i, j);
    out << "\n";
  }
  if (chain.labels) {
    out << "labels:\n";
    for (int i = 0; i < n; ++i)
      out << (i ? " " : "") << (*chain.labels)(i, 0);
    out << "\n";
  }
  if (chain.V) {
    out << "V:\n";
    for (int i = 0; i < n; ++i) out << (i ? " " : "") << (*chain.V)[i];
    out << "\n";
  }
  return out.str();
}

}  // namespace cltlab
