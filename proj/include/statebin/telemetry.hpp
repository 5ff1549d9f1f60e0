#pragma once

// Anonymous uplink simulation: request packets with no appliance identity,
// neighborhood collector tallies, the slotted-MAC throughput model, and the
// measurement-and-verification likelihood test. Aggregator-side code consumes
// tallies only; nothing in this module can reach an appliance id.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "statebin/types.hpp"

namespace statebin {

// Fixed wire order: slot u32, category u8, cluster u16, state u16 (little
// endian, 9 bytes). The payload carries no household or appliance identifier.
struct RequestPacket {
    std::uint32_t slot = 0;
    std::uint8_t category = 0;
    std::uint16_t cluster = 0;
    std::uint16_t state = 0;
};

std::array<std::uint8_t, 9> encode_packet(const RequestPacket& packet);
RequestPacket decode_packet(const std::uint8_t* bytes, std::size_t len);

struct TallyKey {
    std::uint32_t slot;
    std::uint8_t category;
    std::uint16_t cluster;
    std::uint16_t state;

    bool operator<(const TallyKey& o) const {
        if (slot != o.slot) return slot < o.slot;
        if (category != o.category) return category < o.category;
        if (cluster != o.cluster) return cluster < o.cluster;
        return state < o.state;
    }
    bool operator==(const TallyKey& o) const {
        return slot == o.slot && category == o.category && cluster == o.cluster &&
               state == o.state;
    }
};

struct CollectorTally {
    std::vector<std::pair<TallyKey, Count>> counts; // sorted by key
    Count rejected = 0;                             // malformed packets, never guessed

    Count at(const TallyKey& key) const;
    void merge(const CollectorTally& other); // tallies are additive
};

// Exact histogram of the received payloads for one or more slots.
CollectorTally collector_tally(const std::vector<std::vector<std::uint8_t>>& raw_packets);
CollectorTally collector_tally(const std::vector<RequestPacket>& packets);

// columnar forward format: "slot v q x count"
void write_tally(std::ostream& out, const CollectorTally& tally);
CollectorTally read_tally(std::istream& in);

// ---------------------------------------------------------------------------

// One neighborhood on a shared slotted MAC.
struct Neighborhood {
    int households = 0;
    // per-appliance transmission probability within one reporting interval
    std::vector<double> transmit_prob;
    double latency_ratio = 0.0;      // alpha = dtau / dT
    double interval_seconds = 60.0;  // dT

    void validate() const;
};

// rho = dT^-1 sum_i p_i prod_{j != i} (1 - alpha p_j), packets per second
double mac_throughput(const Neighborhood& neighborhood);

struct CoverageReport {
    double capacity_pps = 0.0;        // 1 / dtau
    long capacity_pps_floor = 0;      // reported whole-packet rate
    double density_pps_per_m2 = 0.0;  // capacity / range^2
    double density_truncated = 0.0;   // 4-decimal reported figure
    double demand_pps = 0.0;
    double capacity_ratio = 0.0;      // capacity / demand
};

CoverageReport coverage_limits(double slot_seconds, double range_meters,
                               double demand_pps = 0.0);

// ---------------------------------------------------------------------------

// Gaussian inflexible-load profile for the M&V test.
struct MvProfile {
    std::vector<double> mean;                 // mu
    std::vector<std::vector<double>> covariance; // W, symmetric positive definite
    double threshold = 0.0;                   // eta'
    std::vector<double> dispatched;           // L^DR

    void validate() const;
};

struct MvResult {
    bool accepted = false;
    double statistic = 0.0; // ||L - L_DR - mu||^2_{W^-1}
};

// Mahalanobis test of the dispatched component; throws on singular covariance
// (no silent regularization).
MvResult mv_verify(const std::vector<double>& observed_daily_load,
                   const MvProfile& profile);

} // namespace statebin
