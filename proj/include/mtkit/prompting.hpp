#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mtkit::prompting {

struct LangEntry {
  std::string code;          // e.g. "de-DE"
  std::string display_name;  // e.g. "German"
};

class RegistryError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class LangRegistry {
 public:
  void add(LangEntry e) {
    if (e.code.empty() || e.display_name.empty())
      throw RegistryError("registry: empty code or name");
    auto [it, inserted] = entries_.emplace(e.code, std::move(e));
    if (!inserted) throw RegistryError("registry: duplicate code " + it->first);
  }

  const LangEntry& lookup(const std::string& code) const {
    auto it = entries_.find(code);
    if (it == entries_.end())
      throw RegistryError("registry: unknown language code " + code);
    return it->second;
  }

  bool contains(const std::string& code) const {
    return entries_.count(code) > 0;
  }

  size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, LangEntry> entries_;
};

// CSV "code,name"; blank lines and '#' comment lines ignored. Names may
// contain commas: only the first comma splits.
inline LangRegistry load_registry(std::istream& in) {
  LangRegistry reg;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw RegistryError("registry: line " + std::to_string(line_no) +
                          ": expected code,name");
    reg.add({line.substr(0, comma), line.substr(comma + 1)});
  }
  return reg;
}

inline LangRegistry load_registry_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RegistryError("registry: cannot open " + path);
  return load_registry(in);
}

struct PromptRequest {
  LangEntry source;
  LangEntry target;
  std::string text;
};

// The training/inference prompt. The separator before the payload is
// exactly three newline characters; no trailing whitespace is appended.
inline std::string render_prompt(const PromptRequest& req) {
  if (req.text.empty()) throw std::invalid_argument("render_prompt: empty text");
  const std::string& sl = req.source.display_name;
  const std::string& tl = req.target.display_name;
  std::ostringstream os;
  os << "You are a professional " << sl << " (" << req.source.code << ") to "
     << tl << " (" << req.target.code << ") translator. "
     << "Your goal is to accurately convey the meaning and nuances of the "
     << "original " << sl << " text while adhering to " << tl
     << " grammar, vocabulary, and cultural sensitivities. "
     << "Produce only the " << tl
     << " translation, without any additional explanations or commentary. "
     << "Please translate the following " << sl << " text into " << tl
     << ":\n\n\n"
     << req.text;
  return os.str();
}

inline std::string render_prompt(const LangRegistry& reg,
                                 const std::string& source_code,
                                 const std::string& target_code,
                                 const std::string& text) {
  return render_prompt({reg.lookup(source_code), reg.lookup(target_code), text});
}

}  // namespace mtkit::prompting
