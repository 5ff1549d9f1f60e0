#include "statebin/telemetry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace statebin {

std::array<std::uint8_t, 9> encode_packet(const RequestPacket& packet) {
    std::array<std::uint8_t, 9> b{};
    b[0] = packet.slot & 0xFF;
    b[1] = (packet.slot >> 8) & 0xFF;
    b[2] = (packet.slot >> 16) & 0xFF;
    b[3] = (packet.slot >> 24) & 0xFF;
    b[4] = packet.category;
    b[5] = packet.cluster & 0xFF;
    b[6] = (packet.cluster >> 8) & 0xFF;
    b[7] = packet.state & 0xFF;
    b[8] = (packet.state >> 8) & 0xFF;
    return b;
}

RequestPacket decode_packet(const std::uint8_t* bytes, std::size_t len) {
    if (len != 9) throw Error("decode_packet: wrong length");
    RequestPacket p;
    p.slot = static_cast<std::uint32_t>(bytes[0]) |
             (static_cast<std::uint32_t>(bytes[1]) << 8) |
             (static_cast<std::uint32_t>(bytes[2]) << 16) |
             (static_cast<std::uint32_t>(bytes[3]) << 24);
    p.category = bytes[4];
    p.cluster = static_cast<std::uint16_t>(bytes[5]) |
                (static_cast<std::uint16_t>(bytes[6]) << 8);
    p.state = static_cast<std::uint16_t>(bytes[7]) |
              (static_cast<std::uint16_t>(bytes[8]) << 8);
    return p;
}

Count CollectorTally::at(const TallyKey& key) const {
    for (const auto& [k, c] : counts)
        if (k == key) return c;
    return 0;
}

void CollectorTally::merge(const CollectorTally& other) {
    std::map<TallyKey, Count> merged;
    for (const auto& [k, c] : counts) merged[k] += c;
    for (const auto& [k, c] : other.counts) merged[k] += c;
    counts.assign(merged.begin(), merged.end());
    rejected += other.rejected;
}

CollectorTally collector_tally(const std::vector<RequestPacket>& packets) {
    std::map<TallyKey, Count> counts;
    for (const auto& p : packets)
        counts[TallyKey{p.slot, p.category, p.cluster, p.state}]++;
    CollectorTally t;
    t.counts.assign(counts.begin(), counts.end());
    return t;
}

CollectorTally collector_tally(const std::vector<std::vector<std::uint8_t>>& raw_packets) {
    std::map<TallyKey, Count> counts;
    Count rejected = 0;
    for (const auto& raw : raw_packets) {
        if (raw.size() != 9 || raw[4] > 4) {
            rejected++; // malformed: count, never guess
            continue;
        }
        RequestPacket p = decode_packet(raw.data(), raw.size());
        counts[TallyKey{p.slot, p.category, p.cluster, p.state}]++;
    }
    CollectorTally t;
    t.counts.assign(counts.begin(), counts.end());
    t.rejected = rejected;
    return t;
}

void write_tally(std::ostream& out, const CollectorTally& tally) {
    out << "# slot v q x count\n";
    for (const auto& [k, c] : tally.counts)
        out << k.slot << ' ' << static_cast<int>(k.category) << ' ' << k.cluster << ' '
            << k.state << ' ' << c << '\n';
}

CollectorTally read_tally(std::istream& in) {
    std::map<TallyKey, Count> counts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        long slot, v, q, x;
        Count c;
        if (!(ls >> slot >> v >> q >> x >> c))
            throw Error("read_tally: malformed line: " + line);
        counts[TallyKey{static_cast<std::uint32_t>(slot), static_cast<std::uint8_t>(v),
                        static_cast<std::uint16_t>(q), static_cast<std::uint16_t>(x)}] += c;
    }
    CollectorTally t;
    t.counts.assign(counts.begin(), counts.end());
    return t;
}

// ---------------------------------------------------------------------------

void Neighborhood::validate() const {
    if (interval_seconds <= 0.0) throw Error("Neighborhood: interval must be positive");
    if (latency_ratio < 0.0 || latency_ratio >= 1.0)
        throw Error("Neighborhood: alpha must lie in [0, 1)");
    for (double p : transmit_prob)
        if (p < 0.0 || p > 1.0)
            throw Error("Neighborhood: transmission probability outside [0, 1]");
}

double mac_throughput(const Neighborhood& neighborhood) {
    neighborhood.validate();
    // alpha < 1 keeps every factor positive, so the per-node product is the
    // full product divided by the node's own factor
    double full_product = 1.0;
    for (double p : neighborhood.transmit_prob)
        full_product *= 1.0 - neighborhood.latency_ratio * p;
    double sum = 0.0;
    for (double p : neighborhood.transmit_prob) {
        if (p == 0.0) continue;
        sum += p * full_product / (1.0 - neighborhood.latency_ratio * p);
    }
    return sum / neighborhood.interval_seconds;
}

CoverageReport coverage_limits(double slot_seconds, double range_meters, double demand_pps) {
    if (slot_seconds <= 0.0) throw Error("coverage_limits: slot time must be positive");
    CoverageReport r;
    r.capacity_pps = 1.0 / slot_seconds;
    r.capacity_pps_floor = static_cast<long>(std::floor(r.capacity_pps));
    if (range_meters > 0.0) {
        r.density_pps_per_m2 = r.capacity_pps / (range_meters * range_meters);
        r.density_truncated = std::floor(r.density_pps_per_m2 * 1e4) / 1e4;
    }
    r.demand_pps = demand_pps;
    if (demand_pps > 0.0) r.capacity_ratio = r.capacity_pps / demand_pps;
    return r;
}

// ---------------------------------------------------------------------------

void MvProfile::validate() const {
    const std::size_t n = mean.size();
    if (n == 0) throw Error("MvProfile: empty profile");
    if (dispatched.size() != n) throw Error("MvProfile: dispatched length mismatch");
    if (covariance.size() != n) throw Error("MvProfile: covariance must be N x N");
    for (const auto& row : covariance)
        if (row.size() != n) throw Error("MvProfile: covariance must be N x N");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(covariance[i][j] - covariance[j][i]) > 1e-9)
                throw Error("MvProfile: covariance must be symmetric");
}

namespace {

// Cholesky factorization; throws when the matrix is not positive definite.
std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& a) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            if (i == j) {
                if (s <= 1e-12)
                    throw Error("mv_verify: covariance is singular or not positive definite");
                l[i][i] = std::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    return l;
}

} // namespace

MvResult mv_verify(const std::vector<double>& observed_daily_load,
                   const MvProfile& profile) {
    profile.validate();
    const std::size_t n = profile.mean.size();
    if (observed_daily_load.size() != n)
        throw Error("mv_verify: observation length does not match the profile");

    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i)
        diff[i] = observed_daily_load[i] - profile.dispatched[i] - profile.mean[i];

    auto l = cholesky(profile.covariance);
    // solve L z = diff; statistic = z'z
    std::vector<double> z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = diff[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i][k] * z[k];
        z[i] = s / l[i][i];
    }
    MvResult r;
    r.statistic = 0.0;
    for (double v : z) r.statistic += v * v;
    r.accepted = r.statistic <= profile.threshold;
    return r;
}

} // namespace statebin
