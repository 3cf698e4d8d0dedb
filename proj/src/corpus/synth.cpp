// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "corpus/synth.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/random.hpp"

namespace notecoder::corpus {

namespace {

// Letters-only word for an index ("a", "b", ..., "ba", ...). Never collides
// with filler words, which carry digits.
std::string letters(std::size_t n) {
  std::string s;
  do {
    s.insert(s.begin(), static_cast<char>('a' + n % 26));
    n /= 26;
  } while (n > 0);
  return s;
}

constexpr const char* kAbbreviations[] = {"pt", "w/", "sob", "hx", "htn",
                                          "prn", "s/p", "f/u", "iv", "po"};
constexpr const char* kPlaceholders[] = {
    "[**2101-5-12**]", "[**Last Name (un) 4524**]", "[**Hospital1 18**]",
    "[**First Name8 (NamePattern2) **]", "[**Known lastname 1022**]"};

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 32);
  return w;
}

}  // namespace

const std::vector<CodeLabel>& synthetic_codes() {
  static const std::vector<CodeLabel> codes = {
      {"038.9", "Unspecified septicemia", 0},
      {"008.45", "Intestinal infection due to Clostridium difficile", 0},
      {"070.54", "Chronic hepatitis C without hepatic coma", 0},
      {"162.9", "Malignant neoplasm of bronchus and lung", 1},
      {"197.7", "Secondary malignant neoplasm of liver", 1},
      {"198.3", "Secondary malignant neoplasm of brain and spinal cord", 1},
      {"250.00", "Diabetes mellitus without complication, type II", 2},
      {"272.4", "Other and unspecified hyperlipidemia", 2},
      {"244.9", "Unspecified acquired hypothyroidism", 2},
      {"276.2", "Acidosis", 2},
      {"285.9", "Anemia, unspecified", 3},
      {"287.5", "Thrombocytopenia, unspecified", 3},
      {"285.1", "Acute posthemorrhagic anemia", 3},
      {"311", "Depressive disorder, not elsewhere classified", 4},
      {"305.1", "Tobacco use disorder", 4},
      {"303.90", "Other and unspecified alcohol dependence", 4},
      {"345.90", "Epilepsy, unspecified", 5},
      {"348.31", "Metabolic encephalopathy", 5},
      {"327.23", "Obstructive sleep apnea", 5},
      {"401.9", "Unspecified essential hypertension", 6},
      {"428.0", "Congestive heart failure, unspecified", 6},
      {"427.31", "Atrial fibrillation", 6},
      {"414.01", "Coronary atherosclerosis of native coronary artery", 6},
      {"410.71", "Subendocardial infarction, initial episode", 6},
      {"518.81", "Acute respiratory failure", 7},
      {"486", "Pneumonia, organism unspecified", 7},
      {"496", "Chronic airway obstruction, not elsewhere classified", 7},
      {"507.0", "Pneumonitis due to inhalation of food or vomitus", 7},
      {"530.81", "Esophageal reflux", 8},
      {"571.2", "Alcoholic cirrhosis of liver", 8},
      {"578.9", "Hemorrhage of gastrointestinal tract, unspecified", 8},
      {"584.9", "Acute kidney failure, unspecified", 9},
      {"599.0", "Urinary tract infection, site not specified", 9},
      {"585.9", "Chronic kidney disease, unspecified", 9},
      {"765.19", "Other preterm infants", 10},
      {"774.2", "Neonatal jaundice associated with preterm delivery", 10},
      {"745.5", "Ostium secundum type atrial septal defect", 10},
      {"707.03", "Pressure ulcer, lower back", 11},
      {"682.6", "Cellulitis and abscess of leg", 11},
      {"733.00", "Osteoporosis, unspecified", 12},
      {"714.0", "Rheumatoid arthritis", 12},
      {"780.39", "Other convulsions", 13},
      {"799.02", "Hypoxemia", 13},
      {"785.52", "Septic shock", 13},
      {"995.92", "Severe sepsis", 14},
      {"997.31", "Ventilator associated pneumonia", 14},
      {"E878.8", "Other specified surgical operations causing complication", 14},
      {"V58.61", "Long-term (current) use of anticoagulants", 15},
      {"V45.81", "Aortocoronary bypass status", 15},
      {"V15.82", "Personal history of tobacco use", 15},
  };
  return codes;
}

std::vector<double> decaying_marginals(std::size_t n, double high, double ratio) {
  std::vector<double> out(n, high);
  if (n < 2) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = high * std::pow(ratio, -t);
  }
  return out;
}

std::vector<std::string> keywords_for_label(std::size_t label,
                                            std::size_t keywords_per_label) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < keywords_per_label; ++k)
    out.push_back("kw" + letters(label * keywords_per_label + k));
  return out;
}

std::string filler_word(std::size_t index) {
  return letters(index % 26) + std::to_string(index);
}

void validate(const SynthSpec& s) {
  require(s.n_notes >= 1, ErrorCode::kConfig, "n_notes must be >= 1");
  require(s.vocab_size >= 1, ErrorCode::kConfig, "vocab_size must be >= 1");
  require(s.keywords_per_label >= 1, ErrorCode::kConfig,
          "keywords_per_label must be >= 1");
  require(s.zipf_exponent >= 0 && std::isfinite(s.zipf_exponent), ErrorCode::kConfig,
          "zipf_exponent must be >= 0");
  require(s.noise_rate >= 0 && s.noise_rate < 1, ErrorCode::kConfig,
          "noise_rate must be in [0, 1)");
  for (double p : s.label_marginals)
    require(p > 0 && p < 1, ErrorCode::kConfig,
            "label marginals must be in (0, 1)");
  require(s.min_sentences >= 1 && s.min_sentences <= s.max_sentences,
          ErrorCode::kConfig, "bad sentence count range");
  require(s.min_words >= 1 && s.min_words <= s.max_words, ErrorCode::kConfig,
          "bad sentence length range");
  require(s.max_notes_per_patient >= 1, ErrorCode::kConfig,
          "max_notes_per_patient must be >= 1");
}

nlohmann::json to_json(const SynthSpec& s) {
  return {{"n_notes", s.n_notes},
          {"vocab_size", s.vocab_size},
          {"zipf_exponent", s.zipf_exponent},
          {"keywords_per_label", s.keywords_per_label},
          {"label_marginals", s.label_marginals},
          {"noise_rate", s.noise_rate},
          {"seed", s.seed},
          {"min_sentences", s.min_sentences},
          {"max_sentences", s.max_sentences},
          {"min_words", s.min_words},
          {"max_words", s.max_words},
          {"max_notes_per_patient", s.max_notes_per_patient},
          {"deid_rate", s.deid_rate},
          {"abbreviation_rate", s.abbreviation_rate}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::kConfig, "synth spec must be a JSON object");
  SynthSpec s;
  const nlohmann::json known = to_json(s);
  for (const auto& [key, _] : j.items())
    require(known.contains(key), ErrorCode::kConfig, "unknown synth spec key '" + key + "'");
  try {
    s.n_notes = j.value("n_notes", s.n_notes);
    s.vocab_size = j.value("vocab_size", s.vocab_size);
    s.zipf_exponent = j.value("zipf_exponent", s.zipf_exponent);
    s.keywords_per_label = j.value("keywords_per_label", s.keywords_per_label);
    s.label_marginals = j.value("label_marginals", s.label_marginals);
    s.noise_rate = j.value("noise_rate", s.noise_rate);
    s.seed = j.value("seed", s.seed);
    s.min_sentences = j.value("min_sentences", s.min_sentences);
    s.max_sentences = j.value("max_sentences", s.max_sentences);
    s.min_words = j.value("min_words", s.min_words);
    s.max_words = j.value("max_words", s.max_words);
    s.max_notes_per_patient = j.value("max_notes_per_patient", s.max_notes_per_patient);
    s.deid_rate = j.value("deid_rate", s.deid_rate);
    s.abbreviation_rate = j.value("abbreviation_rate", s.abbreviation_rate);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("synth spec: ") + e.what());
  }
  validate(s);
  return s;
}

SynthCorpus synthesize(const SynthSpec& spec) {
  validate(spec);
  const auto& codes = synthetic_codes();
  const std::size_t n_labels = codes.size();
  std::vector<double> marginals = spec.label_marginals;
  if (marginals.empty()) marginals = decaying_marginals(n_labels, 0.10, 2.5);
  require(marginals.size() == n_labels, ErrorCode::kConfig,
          "expected " + std::to_string(n_labels) + " label marginals");

  SynthCorpus out;
  out.space = LabelSpace::builtin_chapters().with_codes(codes);

  std::vector<std::vector<std::string>> keywords;
  for (std::size_t l = 0; l < n_labels; ++l)
    keywords.push_back(keywords_for_label(l, spec.keywords_per_label));

  std::vector<double> filler_cdf(spec.vocab_size);
  double total = 0;
  for (std::size_t i = 0; i < spec.vocab_size; ++i) {
    total += std::pow(static_cast<double>(i + 1), -spec.zipf_exponent);
    filler_cdf[i] = total;
  }
  auto draw_filler = [&](Rng& r) {
    const double u = r.uniform() * total;
    const auto it = std::upper_bound(filler_cdf.begin(), filler_cdf.end(), u);
    return filler_word(std::min<std::size_t>(
        static_cast<std::size_t>(it - filler_cdf.begin()), spec.vocab_size - 1));
  };

  Rng rng(mix(spec.seed, std::string_view("synthesize")));
  std::size_t patient = 0;
  std::size_t notes_left_for_patient = 0;
  for (std::size_t n = 0; n < spec.n_notes; ++n) {
    if (notes_left_for_patient == 0) {
      ++patient;
      notes_left_for_patient =
          static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(
                                                      spec.max_notes_per_patient)));
    }
    --notes_left_for_patient;

    preprocess::RawNote note;
    note.note_id = "n" + std::to_string(n + 1);
    note.subject_id = "p" + std::to_string(patient);
    note.hadm_id = "h" + std::to_string(patient * 10 + notes_left_for_patient);

    const auto n_sent = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(spec.min_sentences),
                    static_cast<std::int64_t>(spec.max_sentences)));
    std::vector<std::vector<std::string>> sentences(n_sent);
    for (auto& s : sentences) {
      const auto n_words = rng.between(static_cast<std::int64_t>(spec.min_words),
                                       static_cast<std::int64_t>(spec.max_words));
      for (std::int64_t w = 0; w < n_words; ++w)
        s.push_back(draw_filler(rng));
    }
    // Insert after the first word so sentence starts stay capitalised filler.
    auto plant = [&](const std::string& word) {
      auto& s = sentences[rng.below(n_sent)];
      const std::size_t at = 1 + rng.below(s.size());
      s.insert(s.begin() + static_cast<std::ptrdiff_t>(at), word);
    };

    for (std::size_t l = 0; l < n_labels; ++l) {
      const bool positive = rng.bernoulli(marginals[l]);
      const bool noisy = !positive && rng.bernoulli(spec.noise_rate);
      if (positive) note.codes.push_back(codes[l].code);
      if (positive || noisy)
        plant(keywords[l][rng.below(spec.keywords_per_label)]);
    }
    for (auto& s : sentences) {
      if (rng.bernoulli(spec.abbreviation_rate)) {
        const std::size_t at = 1 + rng.below(s.size());
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(at),
                 kAbbreviations[rng.below(std::size(kAbbreviations))]);
      }
      if (rng.bernoulli(spec.deid_rate)) {
        const std::size_t at = 1 + rng.below(s.size());
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(at),
                 kPlaceholders[rng.below(std::size(kPlaceholders))]);
      }
    }

    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (i > 0) note.text += (rng.bernoulli(0.2) ? "\n" : " ");
      for (std::size_t w = 0; w < sentences[i].size(); ++w) {
        if (w > 0) note.text += ' ';
        note.text += w == 0 ? capitalize(sentences[i][w]) : sentences[i][w];
      }
      note.text += '.';
    }
    out.codes_by_note[note.note_id] = note.codes;
    out.notes.push_back(std::move(note));
  }
  return out;
}

}  // namespace notecoder::corpus
