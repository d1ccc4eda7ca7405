#include "ptmc/ising.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "ptmc/bytes.hpp"

namespace ptmc {

namespace {

std::string site_pair(SiteIndex a, SiteIndex b) {
    return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

IsingModel::IsingModel(std::size_t num_sites, std::vector<float> fields, std::vector<Coupling> couplings)
    : fields_(std::move(fields)) {
    if (fields_.size() != num_sites) {
        throw std::invalid_argument("field count " + std::to_string(fields_.size()) + " != site count " +
                                    std::to_string(num_sites));
    }
    if (num_sites > std::numeric_limits<std::int32_t>::max()) {
        throw std::invalid_argument("too many sites for 32-bit site indices");
    }
    std::set<std::pair<SiteIndex, SiteIndex>> seen;
    std::vector<std::uint32_t> degree(num_sites, 0);
    first_.reserve(couplings.size());
    second_.reserve(couplings.size());
    strengths_.reserve(couplings.size());
    for (const Coupling& c : couplings) {
        if (c.first >= num_sites || c.second >= num_sites) {
            throw std::invalid_argument("coupling " + site_pair(c.first, c.second) + " references a site >= " +
                                        std::to_string(num_sites));
        }
        if (c.first == c.second) {
            throw std::invalid_argument("self-coupling at site " + std::to_string(c.first));
        }
        if (!seen.emplace(std::min(c.first, c.second), std::max(c.first, c.second)).second) {
            throw std::invalid_argument("duplicate coupling " + site_pair(c.first, c.second));
        }
        first_.push_back(c.first);
        second_.push_back(c.second);
        strengths_.push_back(c.strength);
        ++degree[c.first];
        ++degree[c.second];
    }

    offsets_.assign(num_sites + 1, 0);
    for (std::size_t i = 0; i < num_sites; ++i) offsets_[i + 1] = offsets_[i] + degree[i];
    adjacency_.resize(offsets_[num_sites]);
    std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t k = 0; k < strengths_.size(); ++k) {
        adjacency_[fill[first_[k]]++] = {second_[k], strengths_[k]};
        adjacency_[fill[second_[k]]++] = {first_[k], strengths_[k]};
    }
}

std::vector<Coupling> IsingModel::couplings() const {
    std::vector<Coupling> out;
    out.reserve(strengths_.size());
    for (std::size_t k = 0; k < strengths_.size(); ++k) out.push_back({first_[k], second_[k], strengths_[k]});
    return out;
}

std::uint64_t IsingModel::fingerprint() const {
    ByteWriter w;
    w.put<std::uint64_t>(fields_.size());
    w.put_all(std::span<const float>{fields_});
    w.put<std::uint64_t>(strengths_.size());
    w.put_all(std::span<const SiteIndex>{first_});
    w.put_all(std::span<const SiteIndex>{second_});
    w.put_all(std::span<const float>{strengths_});
    return fnv1a64(w.bytes());
}

SpinState::SpinState(std::span<const std::int8_t> spins)
    : storage_(spins.size() + kernels::kSpinGatherPadding, 0), size_(spins.size()) {
    for (std::size_t i = 0; i < spins.size(); ++i) {
        if (spins[i] != 1 && spins[i] != -1) {
            throw std::invalid_argument("spin " + std::to_string(i) + " is not +-1");
        }
        storage_[i] = spins[i];
    }
}

SpinState SpinState::from_bits(std::size_t num_sites, std::uint64_t bits) {
    SpinState s(num_sites);
    for (std::size_t i = 0; i < num_sites && i < 64; ++i) {
        if ((bits >> i) & 1u) s.storage_[i] = -1;
    }
    return s;
}

std::uint64_t SpinState::to_bits() const {
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < size_ && i < 64; ++i) {
        if (storage_[i] < 0) bits |= std::uint64_t{1} << i;
    }
    return bits;
}

double energy(const IsingModel& model, const SpinState& state) {
    if (state.size() != model.num_sites()) {
        throw std::invalid_argument("state has " + std::to_string(state.size()) + " sites, model has " +
                                    std::to_string(model.num_sites()));
    }
    const auto& k = kernels::active_kernels();
    const double bonds = k.bond_sum(model.coupling_first().data(), model.coupling_second().data(),
                                    model.coupling_strengths().data(), model.num_couplings(), state.data());
    const double field = k.signed_sum(model.fields().data(), state.data(), model.num_sites());
    return -bonds - field;
}

float delta_energy(const IsingModel& model, const SpinState& state, SiteIndex site) {
    if (site >= model.num_sites() || state.size() != model.num_sites()) {
        throw std::out_of_range("site " + std::to_string(site) + " outside model of " +
                                std::to_string(model.num_sites()) + " sites");
    }
    return delta_energy_unchecked(model, state, site);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> RegionPartition::regions_in(RegionGroup group) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < group_of_region.size(); ++r) {
        if (group_of_region[r] == group) out.push_back(r);
    }
    return out;
}

namespace {
PartitionViolation violation(PartitionViolation::Kind kind, std::string message) {
    PartitionViolation v;
    v.kind = kind;
    v.message = std::move(message);
    return v;
}
}  // namespace

std::optional<PartitionViolation> verify_partition(const IsingModel& model, const RegionPartition& partition) {
    using Kind = PartitionViolation::Kind;
    if (partition.regions.size() != partition.group_of_region.size()) {
        return violation(Kind::ShapeMismatch,
                                  std::to_string(partition.regions.size()) + " regions but " +
                                      std::to_string(partition.group_of_region.size()) + " group labels");
    }
    constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);
    std::vector<std::size_t> region_of(model.num_sites(), kUnassigned);
    for (std::size_t r = 0; r < partition.regions.size(); ++r) {
        for (const SiteIndex s : partition.regions[r]) {
            if (s >= model.num_sites()) {
                return violation(Kind::SiteOutOfRange,
                                          "region " + std::to_string(r) + " contains site " + std::to_string(s) +
                                              " outside the model");
            }
            if (region_of[s] != kUnassigned) {
                return violation(Kind::SiteInTwoRegions,
                                          "site " + std::to_string(s) + " is in regions " +
                                              std::to_string(region_of[s]) + " and " + std::to_string(r));
            }
            region_of[s] = r;
        }
    }
    for (std::size_t s = 0; s < region_of.size(); ++s) {
        if (region_of[s] == kUnassigned) {
            return violation(Kind::SiteUncovered, "site " + std::to_string(s) + " is in no region");
        }
    }
    for (const Coupling& c : model.couplings()) {
        const std::size_t ra = region_of[c.first];
        const std::size_t rb = region_of[c.second];
        if (ra != rb && partition.group_of_region[ra] == partition.group_of_region[rb]) {
            PartitionViolation v = violation(Kind::SameGroupCoupling,
                                 "coupling " + site_pair(c.first, c.second) + " joins regions " +
                                     std::to_string(ra) + " and " + std::to_string(rb) + " of the same group");
            v.coupling = c;
            v.first_region = ra;
            v.second_region = rb;
            return v;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

std::uint32_t bounded(RngStream& rng, std::uint32_t n) {
    // Rejection keeps the draw unbiased.
    const std::uint32_t limit = static_cast<std::uint32_t>(-n) % n;
    for (;;) {
        const std::uint32_t x = rng.next_u32();
        if (x >= limit) return x % n;
    }
}

float draw_strength(RngStream& rng, Disorder disorder) {
    if (disorder == Disorder::PlusMinusOne) return (rng.next_u32() >> 31) != 0 ? 1.0f : -1.0f;
    // Box-Muller, first variate only.
    const double u1 = 1.0 - static_cast<double>(rng.next_u32()) * 0x1.0p-32;
    const double u2 = static_cast<double>(rng.next_u32()) * 0x1.0p-32;
    return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2));
}

}  // namespace

SliceSpec random_slice(std::size_t qubits, const RandomSliceOptions& options, RngStream& rng) {
    SliceSpec slice;
    slice.qubits = qubits;
    std::set<std::pair<SiteIndex, SiteIndex>> edges;
    auto add_edge = [&](std::size_t a, std::size_t b) {
        if (a == b) return;
        edges.emplace(static_cast<SiteIndex>(std::min(a, b)), static_cast<SiteIndex>(std::max(a, b)));
    };
    switch (options.topology) {
        case SliceTopology::Ring:
            for (std::size_t q = 0; q < qubits && qubits > 1; ++q) add_edge(q, (q + 1) % qubits);
            break;
        case SliceTopology::Complete:
            for (std::size_t a = 0; a < qubits; ++a)
                for (std::size_t b = a + 1; b < qubits; ++b) add_edge(a, b);
            break;
        case SliceTopology::Random: {
            // A ring keeps the slice connected; random chords raise the degree.
            for (std::size_t q = 0; q < qubits && qubits > 1; ++q) add_edge(q, (q + 1) % qubits);
            if (qubits > 3 && options.degree > 2) {
                const std::size_t chords = qubits * (options.degree - 2) / 2;
                for (std::size_t c = 0; c < chords; ++c) {
                    add_edge(bounded(rng, static_cast<std::uint32_t>(qubits)),
                             bounded(rng, static_cast<std::uint32_t>(qubits)));
                }
            }
            break;
        }
    }
    for (const auto& [a, b] : edges) slice.couplings.push_back({a, b, draw_strength(rng, options.disorder)});
    slice.fields.reserve(qubits);
    for (std::size_t q = 0; q < qubits; ++q) {
        slice.fields.push_back(options.field_scale * draw_strength(rng, options.disorder));
    }
    return slice;
}

LayeredProblem generate_layered(const SliceSpec& slice, std::size_t copies, float inter_slice_strength) {
    if (copies < 2 || copies % 2 != 0) {
        throw std::invalid_argument("copies must be even and >= 2, got " + std::to_string(copies));
    }
    if (slice.qubits == 0) throw std::invalid_argument("slice has no qubits");
    if (!slice.fields.empty() && slice.fields.size() != slice.qubits) {
        throw std::invalid_argument("slice field count does not match its qubit count");
    }
    const std::size_t q = slice.qubits;
    const std::size_t sites = q * copies;

    std::vector<float> fields(sites, 0.0f);
    std::vector<Coupling> couplings;
    couplings.reserve(copies * (slice.couplings.size() + q));
    RegionPartition partition;
    partition.regions.resize(copies);
    partition.group_of_region.resize(copies);

    for (std::size_t layer = 0; layer < copies; ++layer) {
        const auto base = static_cast<SiteIndex>(layer * q);
        for (std::size_t i = 0; i < q; ++i) {
            if (!slice.fields.empty()) fields[base + i] = slice.fields[i];
            partition.regions[layer].push_back(base + static_cast<SiteIndex>(i));
        }
        partition.group_of_region[layer] = layer % 2 == 0 ? RegionGroup::A : RegionGroup::B;
        for (const Coupling& c : slice.couplings) {
            if (c.first >= q || c.second >= q) throw std::invalid_argument("slice coupling references a bad qubit");
            couplings.push_back({base + c.first, base + c.second, c.strength});
        }
        // Bond to the next slice; the last slice closes the ring.
        if (copies == 2 && layer == 1) continue;
        const auto next = static_cast<SiteIndex>(((layer + 1) % copies) * q);
        const float strength = copies == 2 ? 2.0f * inter_slice_strength : inter_slice_strength;
        for (std::size_t i = 0; i < q; ++i) {
            couplings.push_back({base + static_cast<SiteIndex>(i), next + static_cast<SiteIndex>(i), strength});
        }
    }
    return LayeredProblem{IsingModel(sites, std::move(fields), std::move(couplings)), std::move(partition), q,
                          copies};
}

// ---------------------------------------------------------------------------

namespace {

std::string format_float(float v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view token, std::size_t line) {
    T value{};
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        throw FormatError("line " + std::to_string(line) + ": bad number '" + std::string(token) + "'");
    }
    return value;
}

}  // namespace

void write_problem(std::ostream& out, const IsingModel& model, const RegionPartition* partition) {
    out << "sites " << model.num_sites() << '\n';
    const auto fields = model.fields();
    for (std::size_t i = 0; i < fields.size(); ++i) out << "field " << i << ' ' << format_float(fields[i]) << '\n';
    for (const Coupling& c : model.couplings()) {
        out << "coupling " << c.first << ' ' << c.second << ' ' << format_float(c.strength) << '\n';
    }
    if (partition != nullptr) {
        for (std::size_t r = 0; r < partition->num_regions(); ++r) {
            out << "region " << r << ' ' << (partition->group_of_region[r] == RegionGroup::A ? 'A' : 'B');
            for (const SiteIndex s : partition->regions[r]) out << ' ' << s;
            out << '\n';
        }
    }
}

ProblemFile read_problem(std::istream& in) {
    std::optional<std::size_t> sites;
    std::vector<float> fields;
    std::vector<Coupling> couplings;
    RegionPartition partition;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (const auto hash = text.find('#'); hash != std::string::npos) text.erase(hash);
        std::istringstream tokens(text);
        std::string keyword;
        if (!(tokens >> keyword)) continue;
        std::vector<std::string> args;
        for (std::string t; tokens >> t;) args.push_back(t);
        auto need = [&](std::size_t n) {
            if (args.size() != n) {
                throw FormatError("line " + std::to_string(line_no) + ": '" + keyword + "' expects " +
                                  std::to_string(n) + " values");
            }
        };
        auto need_header = [&] {
            if (!sites) throw FormatError("line " + std::to_string(line_no) + ": missing 'sites N' header");
        };
        auto site_arg = [&](const std::string& token) {
            const auto s = parse_number<std::uint64_t>(token, line_no);
            if (s >= *sites) {
                throw FormatError("line " + std::to_string(line_no) + ": site " + token + " out of range");
            }
            return static_cast<SiteIndex>(s);
        };
        if (keyword == "sites") {
            if (sites) throw FormatError("line " + std::to_string(line_no) + ": duplicate 'sites' header");
            need(1);
            sites = parse_number<std::size_t>(args[0], line_no);
            fields.assign(*sites, 0.0f);
        } else if (keyword == "field") {
            need_header();
            need(2);
            fields[site_arg(args[0])] = parse_number<float>(args[1], line_no);
        } else if (keyword == "coupling") {
            need_header();
            need(3);
            couplings.push_back({site_arg(args[0]), site_arg(args[1]), parse_number<float>(args[2], line_no)});
        } else if (keyword == "region") {
            need_header();
            if (args.size() < 2) throw FormatError("line " + std::to_string(line_no) + ": region needs id and group");
            const auto id = parse_number<std::size_t>(args[0], line_no);
            if (id != partition.regions.size()) {
                throw FormatError("line " + std::to_string(line_no) + ": regions must be listed in order 0, 1, ...");
            }
            if (args[1] != "A" && args[1] != "B") {
                throw FormatError("line " + std::to_string(line_no) + ": region group must be A or B");
            }
            partition.group_of_region.push_back(args[1] == "A" ? RegionGroup::A : RegionGroup::B);
            auto& region = partition.regions.emplace_back();
            for (std::size_t k = 2; k < args.size(); ++k) region.push_back(site_arg(args[k]));
            std::sort(region.begin(), region.end());
        } else {
            throw FormatError("line " + std::to_string(line_no) + ": unknown keyword '" + keyword + "'");
        }
    }
    if (!sites) throw FormatError("problem file has no 'sites N' header");
    try {
        ProblemFile out{IsingModel(*sites, std::move(fields), std::move(couplings)), std::nullopt};
        if (!partition.regions.empty()) out.partition = std::move(partition);
        return out;
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("invalid problem: ") + e.what());
    }
}

}  // namespace ptmc
