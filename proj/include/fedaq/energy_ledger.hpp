#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedaq/csv.hpp"
#include "fedaq/error.hpp"

namespace fedaq {

enum class Link { Uplink, Downlink };

inline const char* to_string(Link link) { return link == Link::Uplink ? "uplink" : "downlink"; }

struct LedgerEntry {
    int round = 0;
    Link link = Link::Uplink;
    int client = 0;
    int element_count = 0;
    int bits_per_element = 0;
    double energy_pj = 0.0;
};

struct EnergyTotals {
    double uplink = 0.0;
    double downlink = 0.0;
    double total = 0.0;
};

// Append-only log of transmitted bits times per-bit energy. One entry per
// transmitted tensor; a broadcast is recorded once per receiving client.
class EnergyLedger {
public:
    EnergyLedger(double e1_pj_per_bit, double e2_pj_per_bit)
        : e1_(e1_pj_per_bit), e2_(e2_pj_per_bit) {
        if (!(e1_ > 0.0) || !(e2_ > 0.0)) {
            throw std::invalid_argument("EnergyLedger: per-bit energies must be positive");
        }
    }

    void record(int round, Link link, int client, int element_count, int bits) {
        if (bits < 1 || bits > 32) {
            throw std::invalid_argument("EnergyLedger: bits must be in [1, 32]");
        }
        if (element_count < 1) {
            throw std::invalid_argument("EnergyLedger: element count must be >= 1");
        }
        if (!entries_.empty() && round < entries_.back().round) {
            throw InvalidStateError("EnergyLedger: round " + std::to_string(round) +
                                    " precedes round " + std::to_string(entries_.back().round));
        }
        const double per_bit = (link == Link::Uplink) ? e1_ : e2_;
        const double energy =
            static_cast<double>(bits) * static_cast<double>(element_count) * per_bit;
        entries_.push_back(LedgerEntry{round, link, client, element_count, bits, energy});
    }

    EnergyTotals total(std::optional<int> up_to_round = std::nullopt) const {
        EnergyTotals t;
        for (const LedgerEntry& e : entries_) {
            if (up_to_round && e.round > *up_to_round) break;
            (e.link == Link::Uplink ? t.uplink : t.downlink) += e.energy_pj;
        }
        t.total = t.uplink + t.downlink;
        return t;
    }

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    double e1() const { return e1_; }
    double e2() const { return e2_; }

    void write_csv(std::ostream& out) const {
        out << "round,link,client,d,bits,energy_pj\n";
        for (const LedgerEntry& e : entries_) {
            out << e.round << ',' << to_string(e.link) << ',' << e.client << ','
                << e.element_count << ',' << e.bits_per_element << ','
                << format_double(e.energy_pj) << '\n';
        }
    }

private:
    double e1_;
    double e2_;
    std::vector<LedgerEntry> entries_;
};

enum class ThresholdKind { AtLeast, AtMost };

// Cumulative total energy at the first round whose metric crosses the
// threshold; nullopt if it never does. metric[m] belongs to round m.
inline std::optional<double> energy_to_reach(const EnergyLedger& ledger,
                                             std::span<const double> metric, double threshold,
                                             ThresholdKind kind) {
    for (std::size_t m = 0; m < metric.size(); ++m) {
        const bool crossed = (kind == ThresholdKind::AtLeast) ? metric[m] >= threshold
                                                              : metric[m] <= threshold;
        if (crossed) {
            return ledger.total(static_cast<int>(m)).total;
        }
    }
    return std::nullopt;
}

}  // namespace fedaq
