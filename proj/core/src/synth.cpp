#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "qevade/dataset.hpp"
#include "qevade/errors.hpp"
#include "qevade/rng.hpp"

namespace qevade {

void SynthSpec::validate() const {
    if (n_benign == 0 || n_malware == 0) throw Error("synth spec requires counts > 0");
    if (k == 0) throw Error("synth spec requires at least one feature");
    if (informative > k) throw Error("informative feature count exceeds k");
    if (noise < 0.0 || noise >= 1.0) throw Error("noise must lie in [0, 1)");
}

namespace {

// Pre-noise set probability of an informative feature. Feature 0 is a
// deterministic anchor (always set on malware, never on benign), so a
// zero-noise corpus stays perfectly separable. The remaining informative
// features lean 0.8/0.2: even indices toward malware, odd toward benign,
// which makes both classes overlap the way permission profiles do.
double informative_probability(std::size_t f, int label) {
    if (f == 0) return label == 1 ? 1.0 : 0.0;
    bool malware_marker = (f % 2 == 0);
    if ((label == 1) == malware_marker) return 0.8;
    return 0.2;
}

LabeledSample synth_sample(const SynthSpec& spec, int label, Rng& rng) {
    std::vector<std::uint8_t> bits(spec.k, 0);
    for (std::size_t f = 0; f < spec.k; ++f) {
        double p = f < spec.informative ? informative_probability(f, label) : 0.5;
        std::uint8_t base = rng.bernoulli(p) ? 1 : 0;
        if (spec.noise > 0.0 && rng.bernoulli(spec.noise)) base ^= 1;
        bits[f] = base;
    }
    return {PermissionVector(std::move(bits)), label};
}

}  // namespace

LabeledDataset synth_dataset(const SynthSpec& spec) {
    spec.validate();

    std::vector<std::string> names;
    names.reserve(spec.k);
    char buf[16];
    for (std::size_t f = 0; f < spec.k; ++f) {
        std::snprintf(buf, sizeof(buf), "p%03zu", f);
        names.emplace_back(buf);
    }
    auto vocab = std::make_shared<Vocabulary>(Vocabulary::from_names(std::move(names)));

    Rng rng(spec.seed);
    std::vector<LabeledSample> samples;
    samples.reserve(spec.n_malware + spec.n_benign);
    for (std::size_t i = 0; i < spec.n_malware; ++i) samples.push_back(synth_sample(spec, 1, rng));
    for (std::size_t i = 0; i < spec.n_benign; ++i) samples.push_back(synth_sample(spec, 0, rng));
    return LabeledDataset(std::move(vocab), std::move(samples));
}

}  // namespace qevade
