#include "ewcft/data/jsonl.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

namespace ewcft::data {

using nlohmann::json;

void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"seed", c.seed},
           {"n_instances", c.n_instances},
           {"vocab_size", c.vocab_size},
           {"n_topics", c.n_topics},
           {"bias_strength", c.bias_strength},
           {"label_distribution", c.label_distribution},
           {"claim_length", c.claim_length},
           {"evidence_length", c.evidence_length},
           {"distractor_pairs", c.distractor_pairs},
           {"alt_form_rate", c.alt_form_rate}};
}

void from_json(const json& j, GeneratorConfig& c) {
  GeneratorConfig d;
  c.seed = j.value("seed", d.seed);
  c.n_instances = j.value("n_instances", d.n_instances);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.n_topics = j.value("n_topics", d.n_topics);
  c.bias_strength = j.value("bias_strength", d.bias_strength);
  c.label_distribution = j.value("label_distribution", d.label_distribution);
  c.claim_length = j.value("claim_length", d.claim_length);
  c.evidence_length = j.value("evidence_length", d.evidence_length);
  c.distractor_pairs = j.value("distractor_pairs", d.distractor_pairs);
  c.alt_form_rate = j.value("alt_form_rate", d.alt_form_rate);
}

void to_json(json& j, const Provenance& p) {
  j = json{{"generator", p.generator}, {"seed", p.seed}};
  if (p.config) j["config"] = *p.config;
}

void from_json(const json& j, Provenance& p) {
  p.generator = j.value("generator", std::string{});
  p.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("config")) {
    p.config = j.at("config").get<GeneratorConfig>();
  } else {
    p.config.reset();
  }
}

namespace {

TokenIds to_ids(const json& tokens, Vocabulary& vocab, bool grow, std::size_t line, const char* field) {
  if (!tokens.is_array()) throw DataFormatError(line, std::string("field '") + field + "' must be an array");
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!t.is_string()) throw DataFormatError(line, std::string("field '") + field + "' must hold strings");
    const auto& text = t.get_ref<const std::string&>();
    if (grow) {
      ids.push_back(vocab.add(text));
    } else if (auto id = vocab.find(text)) {
      ids.push_back(*id);
    } else {
      throw DataFormatError(line, "token '" + text + "' not in header vocabulary");
    }
  }
  return ids;
}

}  // namespace

Dataset read_jsonl(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  json header;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      header = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataFormatError(line_no, std::string("malformed header: ") + e.what());
    }
    break;
  }
  if (!header.is_object() || !header.contains("num_classes") || !header.contains("labels")) {
    throw DataFormatError(line_no, "missing header line with num_classes and labels");
  }
  std::vector<std::string> labels;
  std::size_t num_classes = 0;
  try {
    labels = header.at("labels").get<std::vector<std::string>>();
    num_classes = header.at("num_classes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataFormatError(line_no, std::string("bad header: ") + e.what());
  }
  if (labels.size() != num_classes) throw DataFormatError(line_no, "header num_classes disagrees with labels");

  const bool fixed_vocab = header.contains("vocab");
  Vocabulary vocab;
  if (fixed_vocab) {
    try {
      vocab = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
    } catch (const std::exception& e) {
      throw DataFormatError(line_no, std::string("bad header vocab: ") + e.what());
    }
  }
  Provenance provenance;
  if (header.contains("provenance")) {
    try {
      provenance = header.at("provenance").get<Provenance>();
    } catch (const json::exception& e) {
      throw DataFormatError(line_no, std::string("bad provenance: ") + e.what());
    }
  }

  struct Pending {
    std::string id;
    TokenIds claim, evidence;
    std::size_t label;
    std::size_t line;
  };
  std::vector<Pending> pending;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataFormatError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!row.is_object()) throw DataFormatError(line_no, "expected a JSON object");
    for (const char* key : {"id", "claim", "evidence", "label"}) {
      if (!row.contains(key)) throw DataFormatError(line_no, std::string("missing field '") + key + "'");
    }
    if (!row["id"].is_string() || !row["label"].is_string()) {
      throw DataFormatError(line_no, "fields 'id' and 'label' must be strings");
    }
    const auto& label_text = row["label"].get_ref<const std::string&>();
    auto it = std::find(labels.begin(), labels.end(), label_text);
    if (it == labels.end()) throw DataFormatError(line_no, "unknown label '" + label_text + "'");
    Pending p;
    p.id = row["id"].get<std::string>();
    p.claim = to_ids(row["claim"], vocab, !fixed_vocab, line_no, "claim");
    p.evidence = to_ids(row["evidence"], vocab, !fixed_vocab, line_no, "evidence");
    p.label = static_cast<std::size_t>(it - labels.begin());
    p.line = line_no;
    pending.push_back(std::move(p));
  }

  Dataset out(std::move(vocab), std::move(labels), std::move(provenance));
  out.reserve(pending.size());
  for (auto& p : pending) {
    try {
      out.add(Instance{std::move(p.id), std::move(p.claim), std::move(p.evidence), p.label});
    } catch (const std::invalid_argument& e) {
      throw DataFormatError(p.line, e.what());
    }
  }
  return out;
}

Dataset read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_jsonl: cannot open " + path.string());
  return read_jsonl(in);
}

void write_jsonl(const Dataset& dataset, std::ostream& out) {
  json header{{"num_classes", dataset.num_classes()},
              {"labels", dataset.label_names()},
              {"vocab", dataset.vocab().tokens()},
              {"provenance", dataset.provenance()}};
  out << header.dump() << '\n';
  const auto& vocab = dataset.vocab();
  auto words = [&](const TokenIds& ids) {
    json arr = json::array();
    for (auto id : ids) arr.push_back(vocab.token(id));
    return arr;
  };
  for (const auto& inst : dataset.instances()) {
    json row{{"id", inst.id},
             {"claim", words(inst.claim)},
             {"evidence", words(inst.evidence)},
             {"label", dataset.label_names()[inst.label]}};
    out << row.dump() << '\n';
  }
}

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_jsonl: cannot open " + path.string() + " for writing");
  write_jsonl(dataset, out);
  if (!out) throw std::runtime_error("write_jsonl: write failed for " + path.string());
}

}  // namespace ewcft::data
