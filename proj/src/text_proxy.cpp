#include "nhcrop/text_proxy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "nhcrop/counter_rng.hpp"
#include "nhcrop/errors.hpp"

namespace nhcrop {

namespace {

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

std::string normalize(std::string_view text) {
  std::string out;
  bool space = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

std::vector<std::string> tokens(const std::string& normalized) {
  std::vector<std::string> out;
  std::istringstream in(normalized);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string join_gram(const std::vector<std::string>& toks, std::size_t start, std::size_t n) {
  std::string g = toks[start];
  for (std::size_t i = 1; i < n; ++i) {
    g.push_back(' ');
    g += toks[start + i];
  }
  return g;
}

// Share of code points that are control characters or invalid UTF-8 bytes.
double nonprintable_fraction(std::string_view text) {
  std::size_t total = 0;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    bool ok = true;
    if (c < 0x80) {
      ok = !(c < 0x20 && c != '\t') && c != 0x7F;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
    } else {
      ok = false;
    }
    if (len > 1) {
      if (i + len > text.size()) {
        ok = false;
        len = text.size() - i;
      } else {
        for (std::size_t k = 1; k < len; ++k) {
          if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) ok = false;
        }
        // U+FFFD replacement character
        if (len == 3 && text.substr(i, 3) == "\xEF\xBF\xBD") ok = false;
      }
      if (!ok) len = 1;
    }
    ++total;
    if (!ok) ++bad;
    i += len;
  }
  return total == 0 ? 0.0 : static_cast<double>(bad) / static_cast<double>(total);
}

double jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  // Both sorted and unique.
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool contains_word(const std::vector<std::string>& toks, const std::unordered_set<std::string>& words) {
  return std::any_of(toks.begin(), toks.end(), [&](const std::string& t) { return words.count(t) > 0; });
}

}  // namespace

void SliceFeatures::validate() const {
  const double values[] = {sensitive_rate, dup_ratio,    rep_ngram_ratio, near_dup_score,  tox_proxy,
                           license_prior,  quality_risk, rarity_risk,     lexicon_rate,    source_tox_prior};
  for (double v : values) {
    if (!in_unit(v)) throw std::invalid_argument("slice feature outside [0,1]");
  }
}

void ProxyWeights::validate() const {
  const double w[] = {w_sensitive, w_dup, w_tox, w_license, w_quality, w_rarity};
  for (double x : w) {
    if (!(x >= 0.0)) throw std::invalid_argument("proxy weights must be non-negative");
  }
  if (std::fabs(sum() - 1.0) > 1e-12) throw std::invalid_argument("proxy weights must sum to 1");
}

TextProxyConfig TextProxyConfig::defaults() {
  TextProxyConfig cfg;
  cfg.lexicon = {"kill", "hate", "attack", "abuse", "drugs", "weapon", "violent", "slur"};
  cfg.task_keywords = {
      {"market", "price", "stock", "trade", "revenue", "earnings"},
      {"great", "terrible", "love", "awful", "recommend", "disappointed"},
      {"symptom", "patient", "dose", "clinic", "treatment", "diagnosis"},
  };
  cfg.sources = {
      {"forum", {0, 0.45, 0.30, 0.45}},
      {"news", {1, 0.10, 0.55, 0.30}},
      {"reviews", {2, 0.20, 0.25, 0.25}},
      {"records", {3, 0.15, 0.80, 0.60}},
  };
  return cfg;
}

SliceFeatures extract_features(const std::vector<Document>& slice, const SourceProfile& source,
                               const TextProxyConfig& cfg) {
  if (slice.empty()) throw std::invalid_argument("empty slice");
  const std::size_t n = slice.size();
  const double nd = static_cast<double>(n);

  const auto flags = std::regex::ECMAScript | std::regex::optimize;
  const std::regex patterns[] = {std::regex(cfg.email_pattern, flags), std::regex(cfg.phone_pattern, flags),
                                 std::regex(cfg.url_ip_pattern, flags), std::regex(cfg.identifier_pattern, flags)};
  const std::unordered_set<std::string> lexicon(cfg.lexicon.begin(), cfg.lexicon.end());

  std::vector<std::string> norm(n);
  std::vector<std::vector<std::string>> toks(n);
  std::size_t sensitive = 0;
  std::size_t lexicon_hits = 0;
  std::size_t empty = 0;
  std::size_t malformed = 0;
  double total_len = 0.0;
  std::map<std::string, long> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& text = slice[i].text;
    norm[i] = normalize(text);
    toks[i] = tokens(norm[i]);
    if (std::any_of(std::begin(patterns), std::end(patterns),
                    [&](const std::regex& re) { return std::regex_search(text, re); })) {
      ++sensitive;
    }
    if (!lexicon.empty() && contains_word(toks[i], lexicon)) ++lexicon_hits;
    if (norm[i].empty()) ++empty;
    if (nonprintable_fraction(text) > cfg.malformed_fraction) ++malformed;
    total_len += static_cast<double>(text.size());
    ++labels[slice[i].label];
  }

  SliceFeatures f;
  f.sensitive_rate = static_cast<double>(sensitive) / nd;
  f.lexicon_rate = static_cast<double>(lexicon_hits) / nd;

  const std::set<std::string> distinct(norm.begin(), norm.end());
  f.dup_ratio = 1.0 - static_cast<double>(distinct.size()) / nd;

  std::unordered_map<std::string, long> gram_counts;
  long gram_total = 0;
  const auto rg = static_cast<std::size_t>(cfg.rep_ngram);
  for (const auto& t : toks) {
    for (std::size_t s = 0; s + rg <= t.size(); ++s) {
      ++gram_counts[join_gram(t, s, rg)];
      ++gram_total;
    }
  }
  if (gram_total > 0) {
    long repeated = 0;
    for (const auto& [g, c] : gram_counts) {
      if (c >= 2) repeated += c;
    }
    f.rep_ngram_ratio = static_cast<double>(repeated) / static_cast<double>(gram_total);
  }

  // Shingle sets indexed in sorted-document order so the pair sample does not
  // depend on the order of the input.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norm[a] < norm[b]; });
  std::vector<std::vector<std::uint64_t>> shingles(n);
  const auto sg = static_cast<std::size_t>(cfg.shingle);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& t = toks[order[r]];
    auto& sh = shingles[r];
    if (t.size() < sg) {
      if (!t.empty()) sh.push_back(hash_string(norm[order[r]]));
    } else {
      for (std::size_t s = 0; s + sg <= t.size(); ++s) sh.push_back(hash_string(join_gram(t, s, sg)));
    }
    std::sort(sh.begin(), sh.end());
    sh.erase(std::unique(sh.begin(), sh.end()), sh.end());
  }
  if (n >= 2) {
    const long all_pairs = static_cast<long>(n * (n - 1) / 2);
    long near = 0;
    long checked = 0;
    if (all_pairs <= cfg.max_pairs) {
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          if (jaccard(shingles[a], shingles[b]) >= cfg.near_dup_threshold) ++near;
          ++checked;
        }
      }
    } else {
      std::string joined;
      for (std::size_t r = 0; r < n; ++r) {
        joined += norm[order[r]];
        joined.push_back('\n');
      }
      const CounterRng rng(hash_string(joined));
      for (long k = 0; k < cfg.max_pairs; ++k) {
        const auto a = rng.below(n, 0, 0, static_cast<std::uint64_t>(k));
        auto b = rng.below(n - 1, 0, 1, static_cast<std::uint64_t>(k));
        if (b >= a) ++b;
        if (jaccard(shingles[a], shingles[b]) >= cfg.near_dup_threshold) ++near;
        ++checked;
      }
    }
    f.near_dup_score = static_cast<double>(near) / static_cast<double>(checked);
  }

  // Length outliers on log length.
  std::vector<double> loglen(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loglen[i] = std::log1p(static_cast<double>(slice[i].text.size()));
    mean += loglen[i];
  }
  mean /= nd;
  double var = 0.0;
  for (double l : loglen) var += (l - mean) * (l - mean);
  const double sd = std::sqrt(var / nd);
  std::size_t outliers = 0;
  if (sd > 0.0) {
    for (double l : loglen) {
      if (std::fabs((l - mean) / sd) > cfg.outlier_z) ++outliers;
    }
  }

  double entropy = 0.0;
  for (const auto& [label, count] : labels) {
    const double p = static_cast<double>(count) / nd;
    entropy -= p * std::log(p);
  }
  const double norm_entropy = labels.size() > 1 ? entropy / std::log(static_cast<double>(labels.size())) : 0.0;

  f.meta.n_docs = static_cast<long>(n);
  f.meta.avg_len = total_len / nd;
  f.meta.label_entropy = entropy;
  f.meta.class_imbalance = clip01(1.0 - norm_entropy);

  f.quality_risk = clip01((static_cast<double>(empty) / nd + static_cast<double>(malformed) / nd +
                           static_cast<double>(outliers) / nd + f.meta.class_imbalance) /
                          4.0);
  f.rarity_risk = 1.0 - std::min(nd / cfg.rarity_docs, 1.0);
  f.source_tox_prior = clip01(source.tox_prior);
  f.tox_proxy = lexicon.empty() ? f.source_tox_prior
                                : clip01(cfg.lexicon_blend * f.lexicon_rate + (1.0 - cfg.lexicon_blend) * f.source_tox_prior);
  f.license_prior = clip01(source.license_prior);
  f.validate();
  return f;
}

double proxy_cost(const SliceFeatures& f, const ProxyWeights& w) {
  w.validate();
  return clip01(w.w_sensitive * f.sensitive_rate + w.w_dup * f.dup_group() + w.w_tox * f.tox_proxy +
                w.w_license * f.license_prior + w.w_quality * f.quality_risk + w.w_rarity * f.rarity_risk);
}

double coarse_base(const SliceFeatures& f, double source_prior, const CoarseCoefficients& c) {
  const double len = std::min(f.meta.avg_len / c.avg_len_scale, 1.0);
  const double entropy = 1.0 - f.meta.class_imbalance;  // normalized label entropy
  return clip01(c.intercept + c.source_prior * source_prior + c.rarity * f.rarity_risk + c.avg_len * len +
                c.label_entropy * entropy);
}

double verify_base(const SliceFeatures& f, const ProxyWeights& w) {
  SliceFeatures audited = f;
  audited.tox_proxy = f.source_tox_prior;
  return proxy_cost(audited, w);
}

std::vector<Document> read_slice_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read slice file " + path);
  std::vector<Document> docs;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(path + ":" + std::to_string(lineno) + ": expected label<TAB>text");
    docs.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return docs;
}

std::vector<Slice> read_slice_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("cannot read slice directory " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Slice> out;
  for (const auto& p : files) {
    Slice s;
    s.name = p.stem().string();
    s.source = s.name.substr(0, s.name.find('-'));
    s.docs = read_slice_file(p.string());
    if (s.docs.empty()) throw DataError("empty slice " + p.string());
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("no slice files in " + dir);
  return out;
}

AssetTable slices_to_asset_table(const std::vector<Slice>& slices, int n_task_kinds, const TextProxyConfig& cfg) {
  if (static_cast<int>(cfg.task_keywords.size()) < n_task_kinds) {
    throw ConfigError("text proxy needs keywords for every task kind");
  }
  AssetTable table;
  table.n_task_kinds = n_task_kinds;
  std::int64_t id = 0;
  for (const auto& slice : slices) {
    const auto it = cfg.sources.find(slice.source);
    if (it == cfg.sources.end()) throw DataError("unknown source '" + slice.source + "' for slice " + slice.name);
    const SourceProfile& src = it->second;
    SliceFeatures f;
    try {
      f = extract_features(slice.docs, src, cfg);
    } catch (const std::invalid_argument& e) {
      throw DataError(slice.name + ": " + e.what());
    }
    AssetRow row;
    row.asset.asset_id = id++;
    row.asset.source_kind = src.kind;
    row.asset.quality = 1.0 - f.quality_risk;
    row.asset.size_norm = 1.0 - f.rarity_risk;
    row.asset.rarity = f.rarity_risk;
    for (int k = 0; k < n_task_kinds; ++k) {
      const std::unordered_set<std::string> words(cfg.task_keywords[k].begin(), cfg.task_keywords[k].end());
      long hits = 0;
      for (const auto& d : slice.docs) {
        if (contains_word(tokens(normalize(d.text)), words)) ++hits;
      }
      const double rate = static_cast<double>(hits) / static_cast<double>(slice.docs.size());
      row.asset.relevance_profile.push_back(std::min(rate / cfg.relevance_saturation, 1.0));
    }
    row.true_cost = proxy_cost(f, cfg.weights);
    row.coarse_base = coarse_base(f, src.coarse_prior, cfg.coarse);
    row.verify_base = verify_base(f, cfg.weights);
    table.rows.push_back(std::move(row));
  }
  table.validate();
  return table;
}

namespace {

const char* const kFiller[] = {"the", "a",     "data",   "report", "of",    "and",   "in",   "for",  "this",
                               "we",  "was",   "with",   "on",     "about", "from",  "new",  "team", "people",
                               "day", "year",  "city",   "after",  "said",  "first", "time", "work", "open",
                               "one", "local", "public", "while",  "more",  "last",  "week", "very", "group"};

struct SliceRecipe {
  double email_rate, phone_rate, id_rate, dup_rate, lexicon_rate, malformed_rate;
  int n_docs;
  int topic;
  int n_labels;
};

}  // namespace

std::vector<Slice> synthesize_slices(int n_slices, std::uint64_t seed, const TextProxyConfig& cfg) {
  std::vector<std::string> source_names;
  for (const auto& [name, profile] : cfg.sources) source_names.push_back(name);
  if (source_names.empty()) throw ConfigError("text proxy config has no sources");
  const CounterRng rng = CounterRng(splitmix64(seed ^ 0x51a1ce5ULL)).derive("corpus");
  const std::size_t n_filler = std::size(kFiller);

  std::vector<Slice> out;
  for (int s = 0; s < n_slices; ++s) {
    const auto r = static_cast<std::uint64_t>(s);
    Slice slice;
    slice.source = source_names[rng.below(source_names.size(), r, 0)];
    const SourceProfile& src = cfg.sources.at(slice.source);
    // Riskier sources leak more identifiers; the metadata only hints at it.
    const double leak = 0.15 + 0.6 * src.license_prior;
    SliceRecipe rec{};
    rec.email_rate = leak * rng.uniform(r, 1) * 0.8;
    rec.phone_rate = leak * rng.uniform(r, 2) * 0.4;
    rec.id_rate = leak * rng.uniform(r, 3) * 0.3;
    rec.dup_rate = 0.5 * rng.uniform(r, 4) * rng.uniform(r, 5);
    rec.lexicon_rate = 2.0 * src.tox_prior * rng.uniform(r, 6);
    rec.malformed_rate = 0.1 * rng.uniform(r, 7) * rng.uniform(r, 8);
    rec.n_docs = 20 + static_cast<int>(rng.below(380, r, 9));
    rec.topic = cfg.task_keywords.empty() ? -1 : static_cast<int>(rng.below(cfg.task_keywords.size(), r, 10));
    rec.n_labels = 1 + static_cast<int>(rng.below(4, r, 11));
    slice.name = slice.source + "-" + std::to_string(s);

    std::vector<std::string> written;
    for (int d = 0; d < rec.n_docs; ++d) {
      const auto idx = static_cast<std::uint64_t>(d);
      const auto u = [&](std::uint64_t ch) { return rng.uniform(r, 100 + ch, idx); };
      Document doc;
      // Skewed label histogram.
      const double lu = u(0);
      doc.label = "c" + std::to_string(std::min(static_cast<int>(lu * lu * rec.n_labels), rec.n_labels - 1));
      if (!written.empty() && u(1) < rec.dup_rate) {
        doc.text = written[rng.below(written.size(), r, 200, idx)];
        slice.docs.push_back(doc);
        continue;
      }
      const int len = 6 + static_cast<int>(rng.below(40, r, 201, idx));
      std::string text;
      for (int w = 0; w < len; ++w) {
        if (!text.empty()) text.push_back(' ');
        const double pick = rng.uniform(r, 300 + static_cast<std::uint64_t>(w), idx);
        if (rec.topic >= 0 && pick < 0.08) {
          const auto& kw = cfg.task_keywords[static_cast<std::size_t>(rec.topic)];
          text += kw[rng.below(kw.size(), r, 202, idx * 64 + static_cast<std::uint64_t>(w))];
        } else {
          text += kFiller[rng.below(n_filler, r, 203, idx * 64 + static_cast<std::uint64_t>(w))];
        }
      }
      if (u(2) < rec.email_rate) text += " contact user" + std::to_string(d) + "@example.org";
      if (u(3) < rec.phone_rate) text += " call +1 555 010 " + std::to_string(1000 + d);
      if (u(4) < rec.id_rate) text += " ref " + std::to_string(4000000 + 37 * d + s);
      if (!cfg.lexicon.empty() && u(5) < rec.lexicon_rate) {
        text += " " + cfg.lexicon[rng.below(cfg.lexicon.size(), r, 204, idx)];
      }
      if (u(6) < rec.malformed_rate) text = std::string(len, '\x01') + text;
      if (u(7) < 0.01) text.clear();
      doc.text = text;
      written.push_back(text);
      slice.docs.push_back(std::move(doc));
    }
    out.push_back(std::move(slice));
  }
  return out;
}

void write_slice_directory(const std::string& dir, const std::vector<Slice>& slices) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& s : slices) {
    std::ofstream out(fs::path(dir) / (s.name + ".tsv"), std::ios::binary);
    if (!out) throw DataError("cannot write slice " + s.name);
    for (const auto& d : s.docs) out << d.label << '\t' << d.text << '\n';
  }
}

AssetTable gen_utility_table(const UtilityTableSpec& spec) {
  if (spec.n_assets <= 0 || spec.n_task_kinds <= 0) throw ConfigError("utility table needs assets and task kinds");
  if (!(spec.correlation >= -1.0 && spec.correlation <= 1.0)) throw ConfigError("correlation must lie in [-1,1]");
  const CounterRng rng = CounterRng(splitmix64(spec.seed ^ 0x7ab1eULL)).derive("utility-table");
  const double rho = spec.correlation;
  const double rest = std::sqrt(1.0 - rho * rho);
  const auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };

  AssetTable table;
  table.n_task_kinds = spec.n_task_kinds;
  for (int i = 0; i < spec.n_assets; ++i) {
    const auto r = static_cast<std::uint64_t>(i);
    AssetRow row;
    row.asset.asset_id = i;
    row.asset.source_kind = i % 4;
    row.asset.quality = rng.uniform(r, 1);
    row.asset.size_norm = rng.uniform(r, 2);
    row.asset.rarity = 1.0 - row.asset.size_norm;
    const double zc = rng.normal(r, 3);
    row.true_cost = spec.cost_low + (spec.cost_high - spec.cost_low) * phi(zc);
    for (int k = 0; k < spec.n_task_kinds; ++k) {
      const double u = rho * zc + rest * rng.normal(r, 10, static_cast<std::uint64_t>(k));
      row.utilities.push_back(u);
      row.asset.relevance_profile.push_back(phi(u));
    }
    row.coarse_base = clip01(row.true_cost + spec.coarse_bias_sd * rng.normal(r, 4));
    row.verify_base = clip01(row.true_cost + spec.verify_bias_sd * rng.normal(r, 5));
    table.rows.push_back(std::move(row));
  }
  table.validate();
  return table;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson needs two equal-length samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace nhcrop
