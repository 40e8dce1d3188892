#include "fedaq/energy_ledger.hpp"

#include <gtest/gtest.h>

#include <sstream>
#include <vector>

using namespace fedaq;

TEST(Ledger, RecordComputesEnergyExactly) {
    EnergyLedger ledger(1.0, 1.0);
    ledger.record(0, Link::Uplink, 0, 10, 4);
    ASSERT_EQ(ledger.entries().size(), 1u);
    EXPECT_EQ(ledger.entries()[0].energy_pj, 40.0);
}

TEST(Ledger, DownlinkChargedPerClient) {
    EnergyLedger ledger(1.0, 1.0);
    ledger.record(0, Link::Downlink, 0, 10, 6);
    ledger.record(0, Link::Downlink, 1, 10, 6);
    const EnergyTotals t = ledger.total();
    EXPECT_EQ(ledger.entries()[0].energy_pj, 60.0);
    EXPECT_EQ(t.downlink, 120.0);
}

TEST(Ledger, ZeroBitsRejected) {
    EnergyLedger ledger(1.0, 1.0);
    EXPECT_THROW(ledger.record(0, Link::Uplink, 0, 10, 0), std::invalid_argument);
    EXPECT_THROW(ledger.record(0, Link::Uplink, 0, 10, 33), std::invalid_argument);
    EXPECT_THROW(ledger.record(0, Link::Uplink, 0, 0, 4), std::invalid_argument);
}

TEST(Ledger, TotalsOfMixedEntries) {
    EnergyLedger ledger(1.0, 1.0);
    ledger.record(0, Link::Uplink, 0, 10, 4);
    ledger.record(0, Link::Downlink, 0, 10, 6);
    ledger.record(0, Link::Downlink, 1, 10, 6);
    const EnergyTotals t = ledger.total();
    EXPECT_EQ(t.uplink, 40.0);
    EXPECT_EQ(t.downlink, 120.0);
    EXPECT_EQ(t.total, 160.0);
}

TEST(Ledger, EmptyTotalsAreZero) {
    EnergyLedger ledger(2.0, 3.0);
    const EnergyTotals t = ledger.total();
    EXPECT_EQ(t.uplink, 0.0);
    EXPECT_EQ(t.downlink, 0.0);
    EXPECT_EQ(t.total, 0.0);
}

TEST(Ledger, PrefixTotals) {
    EnergyLedger ledger(1.0, 1.0);
    ledger.record(0, Link::Uplink, 0, 5, 2);   // 10
    ledger.record(1, Link::Uplink, 0, 5, 2);   // 10
    ledger.record(2, Link::Downlink, 0, 5, 4); // 20
    EXPECT_EQ(ledger.total(0).total, 10.0);
    EXPECT_EQ(ledger.total(1).total, 20.0);
    EXPECT_EQ(ledger.total(2).total, 40.0);
    EXPECT_EQ(ledger.total().total, 40.0);
}

TEST(Ledger, RoundRegressionRejected) {
    EnergyLedger ledger(1.0, 1.0);
    ledger.record(3, Link::Uplink, 0, 5, 2);
    EXPECT_THROW(ledger.record(2, Link::Uplink, 0, 5, 2), InvalidStateError);
    EXPECT_NO_THROW(ledger.record(3, Link::Uplink, 1, 5, 2));
}

TEST(Ledger, OrderWithinRoundDoesNotChangeTotals) {
    EnergyLedger a(1.0, 1.0);
    a.record(0, Link::Uplink, 0, 7, 3);
    a.record(0, Link::Downlink, 0, 7, 5);
    a.record(0, Link::Uplink, 1, 7, 2);
    EnergyLedger b(1.0, 1.0);
    b.record(0, Link::Uplink, 1, 7, 2);
    b.record(0, Link::Uplink, 0, 7, 3);
    b.record(0, Link::Downlink, 0, 7, 5);
    EXPECT_EQ(a.total().total, b.total().total);
    EXPECT_EQ(a.total().uplink, b.total().uplink);
}

TEST(Ledger, FixedPolicyClosedFormTotal) {
    const int rounds = 5, clients = 3, d = 11, bits = 6;
    const double e1 = 1.0, e2 = 1.0;
    EnergyLedger ledger(e1, e2);
    for (int m = 0; m < rounds; ++m) {
        for (int i = 0; i < clients; ++i) ledger.record(m, Link::Downlink, i, d, bits);
        for (int i = 0; i < clients; ++i) ledger.record(m, Link::Uplink, i, d, bits);
    }
    EXPECT_EQ(ledger.total().total,
              static_cast<double>(rounds) * clients * d * bits * (e1 + e2));
}

TEST(Ledger, CsvGolden) {
    EnergyLedger ledger(1.0, 0.5);
    ledger.record(0, Link::Uplink, 2, 4, 3);
    ledger.record(1, Link::Downlink, 0, 4, 2);
    std::ostringstream out;
    ledger.write_csv(out);
    EXPECT_EQ(out.str(),
              "round,link,client,d,bits,energy_pj\n"
              "0,uplink,2,4,3,12\n"
              "1,downlink,0,4,2,4\n");
}

TEST(EnergyToReach, AccuracyCrossing) {
    EnergyLedger ledger(1.0, 1.0);
    for (int m = 0; m < 3; ++m) ledger.record(m, Link::Uplink, 0, 10, 1);  // 10 pJ per round
    const std::vector<double> acc = {0.5, 0.9, 0.95};
    const auto energy = energy_to_reach(ledger, acc, 0.9, ThresholdKind::AtLeast);
    ASSERT_TRUE(energy.has_value());
    EXPECT_EQ(*energy, 20.0);
}

TEST(EnergyToReach, NeverReached) {
    EnergyLedger ledger(1.0, 1.0);
    ledger.record(0, Link::Uplink, 0, 10, 1);
    const std::vector<double> acc = {0.1};
    EXPECT_FALSE(energy_to_reach(ledger, acc, 0.9, ThresholdKind::AtLeast).has_value());
}

TEST(EnergyToReach, ImmediateCrossing) {
    EnergyLedger ledger(1.0, 1.0);
    ledger.record(0, Link::Uplink, 0, 10, 1);
    ledger.record(1, Link::Uplink, 0, 10, 1);
    const std::vector<double> acc = {0.95, 0.99};
    const auto energy = energy_to_reach(ledger, acc, 0.9, ThresholdKind::AtLeast);
    ASSERT_TRUE(energy.has_value());
    EXPECT_EQ(*energy, 10.0);
}

TEST(EnergyToReach, LossDirection) {
    EnergyLedger ledger(1.0, 1.0);
    for (int m = 0; m < 3; ++m) ledger.record(m, Link::Uplink, 0, 10, 1);
    const std::vector<double> loss = {1.2, 0.6, 0.3};
    const auto energy = energy_to_reach(ledger, loss, 0.5, ThresholdKind::AtMost);
    ASSERT_TRUE(energy.has_value());
    EXPECT_EQ(*energy, 30.0);
}
