#include <gtest/gtest.h>

#include <set>

#include "loraicn/mapping.hpp"

using namespace loraicn;

TEST(Mapping, EveryPresetIsValidAndUniquelyNamed) {
  std::set<std::string> names;
  for (const auto& s : scheme_presets()) {
    EXPECT_NO_THROW(s.validate()) << s.name;
    EXPECT_TRUE(names.insert(s.name).second) << s.name;
  }
  EXPECT_EQ(names.size(), 18u);
}

TEST(Mapping, OverviewSchemesComeFirst) {
  const auto t = table_schemes();
  ASSERT_EQ(t.size(), 12u);
  EXPECT_EQ(t.front(), "interest-beacon-data-cap");
  EXPECT_EQ(t.back(), "push-cfp");
  for (const auto& n : t) EXPECT_EQ(find_scheme(n).direction, FlowDirection::NodeToGateway);
}

TEST(Mapping, UnknownSchemeNamed) {
  try {
    find_scheme("interest-smoke-signal");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("interest-smoke-signal"), std::string::npos);
  }
}

TEST(Mapping, CarriersOfRepresentativeSchemes) {
  const auto& ib = find_scheme("interest-beacon-data-cfp");
  EXPECT_EQ(carrier_of(ib.interest), mac::Carrier::Beacon);
  EXPECT_EQ(carrier_of(ib.data), mac::Carrier::Cfp);
  EXPECT_EQ(ib.initiator, Initiator::Gateway);
  EXPECT_TRUE(ib.node_tx_cfp());
  EXPECT_FALSE(ib.gateway_tx_cfp());
  EXPECT_FALSE(ib.node_listens_cap());

  const auto& cc = find_scheme("interest-cap-data-cap");
  EXPECT_TRUE(cc.node_listens_cap());
  EXPECT_EQ(cc.uplink(), Way::Cap);

  const auto& ind = find_scheme("indication-cap-interest-cfp-data-cfp");
  EXPECT_EQ(ind.uplink(), Way::Cap);
  EXPECT_TRUE(ind.gateway_tx_cfp());
  EXPECT_TRUE(ind.node_tx_cfp());

  const auto& push = find_scheme("push-cap");
  EXPECT_TRUE(push.push);
  EXPECT_EQ(push.initiator, Initiator::Node);
  EXPECT_FALSE(push.gateway_tx_cfp());
  EXPECT_TRUE(push.node_uses_cap());

  const auto& bc = find_scheme("downstream-broadcast");
  EXPECT_EQ(bc.direction, FlowDirection::GatewayToNode);
  EXPECT_EQ(carrier_of(bc.data), mac::Carrier::Beacon);
  EXPECT_TRUE(bc.node_tx_cfp());
  EXPECT_FALSE(bc.gateway_tx_cfp());

  const auto& indirect = find_scheme("interest-indirect-data-cap");
  EXPECT_EQ(carrier_of(indirect.interest), mac::Carrier::Cap);
}

TEST(Mapping, InconsistentCombinationsRejected) {
  using I = Initiator;
  using D = FlowDirection;
  using W = Way;
  auto bad = [](I i, D d, W ind, W in, W da, bool p) {
    EXPECT_THROW(make_scheme("x", i, d, ind, in, da, p), ConfigError);
  };
  bad(I::Node, D::NodeToGateway, W::None, W::Cap, W::Cap, true);            // push with an Interest
  bad(I::Gateway, D::NodeToGateway, W::None, W::None, W::Cap, true);        // gateway push
  bad(I::Node, D::NodeToGateway, W::Cap, W::None, W::Cap, false);           // indication without Interest
  bad(I::Gateway, D::NodeToGateway, W::Cap, W::Cfp, W::Cap, false);         // gateway sends indication
  bad(I::Node, D::NodeToGateway, W::BeaconPayload, W::Cfp, W::Cap, false);  // indication in beacon
  bad(I::Gateway, D::NodeToGateway, W::None, W::Cap, W::BeaconPayload, false);
  bad(I::Gateway, D::NodeToGateway, W::None, W::None, W::Cap, false);       // pull without Interest
  bad(I::Node, D::NodeToGateway, W::None, W::Cfp, W::Cfp, false);           // node pull without indication
  bad(I::Gateway, D::GatewayToNode, W::None, W::Cfp, W::Cfp, false);
  bad(I::Node, D::GatewayToNode, W::None, W::BeaconPayload, W::Cfp, false);
  bad(I::Node, D::GatewayToNode, W::None, W::Cfp, W::Cap, false);
  bad(I::Node, D::GatewayToNode, W::Cap, W::Cfp, W::Cfp, false);
}
