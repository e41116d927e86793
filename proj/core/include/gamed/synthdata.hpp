#pragma once

// Synthetic multimodal news records with independently tunable planted
// signals: a class-conditional token-frequency shift in the text, a
// high-frequency checkerboard residue in fake images, and a text/image
// topic-agreement bit driving consistency learning.

#include <cstdint>
#include <string>
#include <vector>

namespace gamed {

struct NewsRecord {
    std::string id;
    std::vector<int> tokens;     // length <= the encoder's l_t, ids < vocab
    int height = 0, width = 0;
    std::vector<float> image;    // row-major, values in [0,1]
    int label = 0;               // 1 = fake
    int consistency = 1;         // 1 = text and image topics agree
};

struct GenSpec {
    int n_train = 2000, n_val = 500, n_test = 500;
    double balance = 0.5;          // fraction of fake records per split
    double text_signal = 0.3;      // class-conditional token distribution skew
    double pattern_signal = 0.15;  // checkerboard amplitude added to fakes
    double p_inconsistent_fake = 0.7;  // P(c=0 | y=1)
    double p_inconsistent_real = 0.1;  // P(c=0 | y=0)
    int topics = 4;
    int vocab = 64;                // id 0 reserved for padding
    int grid = 32;
    int max_tokens = 16;
    std::uint64_t seed = 17;

    void validate() const;
};

struct GenSplits {
    std::vector<NewsRecord> train, val, test;
};

GenSplits generate(const GenSpec& spec);

// JSONL round trip; a trailing ".gz" on the path selects gzip compression.
void write_jsonl(const std::vector<NewsRecord>& records, const std::string& path);
std::vector<NewsRecord> read_jsonl(const std::string& path);

}  // namespace gamed
