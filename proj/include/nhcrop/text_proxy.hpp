#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nhcrop/environment.hpp"

namespace nhcrop {

struct Document {
  std::string label;
  std::string text;
};

struct SliceMeta {
  long n_docs = 0;
  double avg_len = 0.0;  // characters
  double label_entropy = 0.0;  // nats
  double class_imbalance = 0.0;  // 1 - normalized label entropy
};

struct SliceFeatures {
  double sensitive_rate = 0.0;
  double dup_ratio = 0.0;
  double rep_ngram_ratio = 0.0;
  double near_dup_score = 0.0;
  double tox_proxy = 0.0;
  double license_prior = 0.0;
  double quality_risk = 0.0;
  double rarity_risk = 0.0;
  double lexicon_rate = 0.0;  // share of documents with a lexicon hit
  double source_tox_prior = 0.0;
  SliceMeta meta;

  double dup_group() const { return (dup_ratio + rep_ngram_ratio + near_dup_score) / 3.0; }
  // Throws std::invalid_argument when a value leaves [0,1].
  void validate() const;
};

struct ProxyWeights {
  double w_sensitive = 0.30;
  double w_dup = 0.25;
  double w_tox = 0.15;
  double w_license = 0.15;
  double w_quality = 0.10;
  double w_rarity = 0.05;

  double sum() const { return w_sensitive + w_dup + w_tox + w_license + w_quality + w_rarity; }
  // Non-negative weights summing to 1 within 1e-12.
  void validate() const;
};

// Per-source priors looked up by source name.
struct SourceProfile {
  int kind = 0;
  double tox_prior = 0.0;
  double license_prior = 0.0;
  double coarse_prior = 0.0;  // what the platform believes from source identity alone
};

struct CoarseCoefficients {
  double intercept = 0.05;
  double source_prior = 0.55;
  double rarity = 0.15;
  double avg_len = 0.10;
  double label_entropy = 0.10;
  double avg_len_scale = 400.0;  // characters mapping to 1.0
};

struct TextProxyConfig {
  std::string email_pattern = R"(\S+@\S+\.\S+)";
  std::string phone_pattern = R"((\+?\d[\d\-\s]{7,}\d))";
  std::string url_ip_pattern = R"(https?://\S+|(\d{1,3}\.){3}\d{1,3})";
  std::string identifier_pattern = R"(\d{6,})";
  int rep_ngram = 5;
  int shingle = 3;
  double near_dup_threshold = 0.8;
  long max_pairs = 10000;
  double rarity_docs = 300.0;
  double malformed_fraction = 0.1;
  double outlier_z = 3.0;
  double lexicon_blend = 0.5;  // tox = blend * lexicon_rate + (1 - blend) * source prior
  std::vector<std::string> lexicon;
  // Relevance of a slice to task k grows with the share of documents
  // mentioning one of task k's keywords.
  std::vector<std::vector<std::string>> task_keywords;
  double relevance_saturation = 0.5;
  std::map<std::string, SourceProfile> sources;
  ProxyWeights weights;
  CoarseCoefficients coarse;

  static TextProxyConfig defaults();
};

// Throws std::invalid_argument("empty slice") for an empty slice.
SliceFeatures extract_features(const std::vector<Document>& slice, const SourceProfile& source,
                               const TextProxyConfig& cfg);

// Weighted group sum clipped to [0,1]. Throws when the weights are invalid.
double proxy_cost(const SliceFeatures& f, const ProxyWeights& weights);
// Metadata-only estimate, clipped to [0,1].
double coarse_base(const SliceFeatures& f, double source_prior, const CoarseCoefficients& coef);
// Same weighted sum with the toxicity group read from the source prior only.
double verify_base(const SliceFeatures& f, const ProxyWeights& weights);

struct Slice {
  std::string name;
  std::string source;
  std::vector<Document> docs;
};

// One document per line, `label<TAB>text`. Throws DataError on unreadable
// files or malformed lines.
std::vector<Document> read_slice_file(const std::string& path);
// Every regular file of the directory, sorted by name. The source is the file
// name prefix before the first '-'.
std::vector<Slice> read_slice_directory(const std::string& dir);

// Extracts features of every slice and emits one asset row each.
AssetTable slices_to_asset_table(const std::vector<Slice>& slices, int n_task_kinds, const TextProxyConfig& cfg);

// Deterministic labeled corpus with planted sensitive strings, duplicates,
// lexicon terms and task keywords, for fixtures and presets without data.
std::vector<Slice> synthesize_slices(int n_slices, std::uint64_t seed, const TextProxyConfig& cfg);
void write_slice_directory(const std::string& dir, const std::vector<Slice>& slices);

struct UtilityTableSpec {
  int n_assets = 720;
  int n_task_kinds = 3;
  double correlation = 0.0;  // between utility and latent cost
  double cost_low = 0.05;
  double cost_high = 0.8;
  double coarse_bias_sd = 0.2;  // per-asset error of the metadata estimate
  double verify_bias_sd = 0.02;
  std::uint64_t seed = 0;
};

AssetTable gen_utility_table(const UtilityTableSpec& spec);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace nhcrop
