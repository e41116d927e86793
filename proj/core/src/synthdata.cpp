#include "gamed/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "gamed/errors.hpp"
#include "gamed/rng.hpp"

namespace gamed {

namespace {

struct TokenBands {
    int per_topic;
    int fake_start, fake_len;
    int real_start, real_len;
};

// Ids 1..topics*per_topic are topic bands; the rest splits into a
// fake-indicator and a real-indicator band. Id 0 stays reserved for padding.
TokenBands bands_for(const GenSpec& spec) {
    TokenBands b{};
    int usable = spec.vocab - 1;
    b.per_topic = (usable * 3 / 4) / spec.topics;
    int rest = usable - b.per_topic * spec.topics;
    b.fake_start = 1 + b.per_topic * spec.topics;
    b.fake_len = rest / 2;
    b.real_start = b.fake_start + b.fake_len;
    b.real_len = usable - b.per_topic * spec.topics - b.fake_len;
    return b;
}

}  // namespace

void GenSpec::validate() const {
    if (n_train <= 0) throw ConfigError("gen.n_train must be positive");
    if (n_val <= 0) throw ConfigError("gen.n_val must be positive");
    if (n_test <= 0) throw ConfigError("gen.n_test must be positive");
    if (balance < 0.0 || balance > 1.0) throw ConfigError("gen.balance must lie in [0,1]");
    if (text_signal < 0.0 || text_signal > 1.0) throw ConfigError("gen.text_signal must lie in [0,1]");
    if (pattern_signal < 0.0 || pattern_signal > 1.0) {
        throw ConfigError("gen.pattern_signal must lie in [0,1]");
    }
    if (p_inconsistent_fake < 0.0 || p_inconsistent_fake > 1.0) {
        throw ConfigError("gen.p_inconsistent_fake must lie in [0,1]");
    }
    if (p_inconsistent_real < 0.0 || p_inconsistent_real > 1.0) {
        throw ConfigError("gen.p_inconsistent_real must lie in [0,1]");
    }
    if (topics < 2) throw ConfigError("gen.topics must be at least 2");
    if (grid < 4) throw ConfigError("gen.grid must be at least 4");
    if (max_tokens < 2) throw ConfigError("gen.max_tokens must be at least 2");
    // Every token band (per-topic, fake-indicator, real-indicator) needs at
    // least one id beyond the reserved pad id.
    TokenBands b = bands_for(*this);
    if (b.per_topic < 1 || b.fake_len < 1 || b.real_len < 1) {
        throw ConfigError("gen.vocab too small for the topic bands");
    }
}

namespace {

// Class-indicative tokens are noisy evidence: an indicative draw lands in
// the own-class band 4 times out of 5, so single tokens never decide a
// document and the text ceiling stays below saturation.
constexpr double kBandFidelity = 0.8;

int draw_token(const GenSpec& spec, const TokenBands& b, int topic, int label,
               std::mt19937& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < spec.text_signal) {
        const bool own_band = unit(rng) < kBandFidelity;
        const bool fake_band = (label == 1) == own_band;
        if (fake_band) {
            std::uniform_int_distribution<int> pick(0, b.fake_len - 1);
            return b.fake_start + pick(rng);
        }
        std::uniform_int_distribution<int> pick(0, b.real_len - 1);
        return b.real_start + pick(rng);
    }
    std::uniform_int_distribution<int> pick(0, b.per_topic - 1);
    return 1 + topic * b.per_topic + pick(rng);
}

// Smooth per-topic base image in [0.2, 0.8].
double topic_template(int topic, int y, int x, int grid) {
    const double u = double(x) / (grid - 1);
    const double v = double(y) / (grid - 1);
    double t = 0.0;
    switch (topic % 4) {
        case 0: t = u; break;
        case 1: t = v; break;
        case 2: {
            const double dy = v - 0.5, dx = u - 0.5;
            t = std::sqrt(dy * dy + dx * dx) / 0.7071;
            break;
        }
        default: t = 0.5 + 0.5 * std::sin(2.0 * 3.14159265358979 * (u + v)); break;
    }
    t = std::clamp(t, 0.0, 1.0);
    return 0.2 + 0.6 * t;
}

std::vector<float> draw_image(const GenSpec& spec, int image_topic, int label,
                              std::mt19937& rng) {
    const int g = spec.grid;
    std::vector<double> img(static_cast<std::size_t>(g) * g);
    for (int y = 0; y < g; ++y)
        for (int x = 0; x < g; ++x) img[y * g + x] = topic_template(image_topic, y, x, g);

    // Class-independent clutter blobs.
    std::uniform_int_distribution<int> n_blobs(2, 4);
    std::uniform_real_distribution<double> pos(0.0, g - 1.0);
    std::uniform_real_distribution<double> amp(-0.15, 0.15);
    std::uniform_real_distribution<double> width(1.5, 4.0);
    const int blobs = n_blobs(rng);
    for (int bi = 0; bi < blobs; ++bi) {
        const double cy = pos(rng), cx = pos(rng), a = amp(rng), s = width(rng);
        for (int y = 0; y < g; ++y)
            for (int x = 0; x < g; ++x) {
                const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                img[y * g + x] += a * std::exp(-d2 / (2.0 * s * s));
            }
    }

    // Zero-mean high-frequency residue on fakes only. The phase is random
    // per image, so the residue carries no linear pixel-space signature and
    // only the magnitude (what the constrained filter exposes) is planted.
    if (label == 1 && spec.pattern_signal > 0.0) {
        std::uniform_int_distribution<int> phase_pick(0, 1);
        const int phase = phase_pick(rng);
        for (int y = 0; y < g; ++y)
            for (int x = 0; x < g; ++x) {
                img[y * g + x] += ((x + y + phase) % 2 == 0 ? 1.0 : -1.0) * spec.pattern_signal;
            }
    }

    std::vector<float> out(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        out[i] = static_cast<float>(std::clamp(img[i], 0.0, 1.0));
    }
    return out;
}

NewsRecord make_record(const GenSpec& spec, const TokenBands& bands, const std::string& id,
                       int label) {
    // Content stream derived from seed ^ id so records are order-independent.
    std::mt19937 rng = make_rng(mix64(spec.seed, fnv1a(id)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    NewsRecord rec;
    rec.id = id;
    rec.label = label;

    std::uniform_int_distribution<int> topic_pick(0, spec.topics - 1);
    const int text_topic = topic_pick(rng);

    std::uniform_int_distribution<int> len_pick(spec.max_tokens / 2, spec.max_tokens);
    const int len = len_pick(rng);
    rec.tokens.reserve(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) rec.tokens.push_back(draw_token(spec, bands, text_topic, label, rng));

    const double p_incons = label == 1 ? spec.p_inconsistent_fake : spec.p_inconsistent_real;
    int image_topic = text_topic;
    rec.consistency = 1;
    if (unit(rng) < p_incons) {
        rec.consistency = 0;
        std::uniform_int_distribution<int> other(0, spec.topics - 2);
        int t = other(rng);
        image_topic = t >= text_topic ? t + 1 : t;
    }

    rec.height = spec.grid;
    rec.width = spec.grid;
    rec.image = draw_image(spec, image_topic, label, rng);
    return rec;
}

std::vector<NewsRecord> make_split(const GenSpec& spec, const std::string& split, int count) {
    // Exact class balance, order shuffled by a split-level stream.
    const int n_fake = static_cast<int>(std::lround(count * spec.balance));
    std::vector<int> labels(static_cast<std::size_t>(count), 0);
    std::fill(labels.begin(), labels.begin() + n_fake, 1);
    std::mt19937 split_rng = make_rng(mix64(spec.seed, fnv1a(split)));
    std::shuffle(labels.begin(), labels.end(), split_rng);

    const TokenBands bands = bands_for(spec);
    std::vector<NewsRecord> out;
    out.reserve(static_cast<std::size_t>(count));
    char buf[32];
    for (int i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof(buf), "%s-%05d", split.c_str(), i);
        out.push_back(make_record(spec, bands, buf, labels[static_cast<std::size_t>(i)]));
    }
    return out;
}

}  // namespace

GenSplits generate(const GenSpec& spec) {
    spec.validate();
    GenSplits splits;
    splits.train = make_split(spec, "train", spec.n_train);
    splits.val = make_split(spec, "val", spec.n_val);
    splits.test = make_split(spec, "test", spec.n_test);
    return splits;
}

}  // namespace gamed
