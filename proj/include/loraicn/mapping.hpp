#pragma once

// Mapping of ICN message types onto DSME carriers.

#include <algorithm>
#include <string>
#include <vector>

#include "loraicn/mac_dsme.hpp"
#include "loraicn/sim_core.hpp"

namespace loraicn {

enum class Initiator { Gateway, Node };
enum class FlowDirection { NodeToGateway, GatewayToNode };
enum class Way { None, BeaconPayload, BeaconIndirectCap, Cap, Cfp };

inline const char* to_string(Way w) {
  switch (w) {
    case Way::None: return "none";
    case Way::BeaconPayload: return "BEACON-PAYLOAD";
    case Way::BeaconIndirectCap: return "BEACON-INDIRECT-CAP";
    case Way::Cap: return "CAP";
    default: return "CFP";
  }
}

/// MAC carrier a message using `w` actually travels on.
inline mac::Carrier carrier_of(Way w) {
  switch (w) {
    case Way::BeaconPayload: return mac::Carrier::Beacon;
    case Way::Cfp: return mac::Carrier::Cfp;
    default: return mac::Carrier::Cap;
  }
}

struct MappingScheme {
  std::string name;
  Initiator initiator = Initiator::Gateway;
  FlowDirection direction = FlowDirection::NodeToGateway;
  Way indication = Way::None;
  Way interest = Way::Cfp;
  Way data = Way::Cfp;
  bool push = false;

  /// Carrier the node uses toward the gateway, if any.
  Way uplink() const {
    if (direction == FlowDirection::GatewayToNode) return interest;
    if (indication != Way::None) return indication;
    return data;
  }

  bool node_tx_cfp() const {
    if (direction == FlowDirection::GatewayToNode) return interest == Way::Cfp;
    return data == Way::Cfp || indication == Way::Cfp;
  }

  bool gateway_tx_cfp() const {
    if (direction == FlowDirection::GatewayToNode) return data == Way::Cfp;
    return !push && interest == Way::Cfp;
  }

  /// Nodes keep the radio on through every CAP only when the gateway may
  /// address them there unannounced.
  bool node_listens_cap() const {
    return direction == FlowDirection::NodeToGateway && !push && interest == Way::Cap;
  }

  bool node_uses_cap() const {
    return node_listens_cap() || uplink() == Way::Cap;
  }

  void validate() const {
    auto fail = [&](const std::string& why) { throw ConfigError("scheme '" + name + "': " + why); };
    if (push) {
      if (interest != Way::None || indication != Way::None)
        fail("push schemes carry neither Interests nor indications");
      if (initiator != Initiator::Node) fail("push is node-initiated");
      if (data != Way::Cap && data != Way::Cfp) fail("push Data travels in CAP or CFP");
    }
    if (indication != Way::None) {
      if (initiator != Initiator::Node) fail("indications are node-initiated");
      if (indication != Way::Cap && indication != Way::Cfp) fail("indications travel in CAP or CFP");
      if (interest == Way::None) fail("an indication must be followed by an Interest");
    }
    if (data == Way::BeaconPayload) {
      if (initiator != Initiator::Node || direction != FlowDirection::GatewayToNode)
        fail("beacon-carried Data is only for node-requested downstream content");
    }
    if (direction == FlowDirection::GatewayToNode) {
      if (initiator != Initiator::Node) fail("downstream content is requested by nodes");
      if (interest != Way::Cap && interest != Way::Cfp) fail("node Interests travel in CAP or CFP");
      if (data != Way::Cfp && data != Way::BeaconPayload) fail("downstream Data travels in CFP or the beacon");
      if (push || indication != Way::None) fail("downstream schemes use neither push nor indication");
    } else {
      if (data != Way::Cap && data != Way::Cfp) fail("upstream Data travels in CAP or CFP");
      if (!push && interest == Way::None) fail("pull schemes need an Interest carrier");
      if (initiator == Initiator::Node && !push && indication == Way::None)
        fail("node-initiated upstream schemes use push or indication");
      if (initiator == Initiator::Gateway && indication != Way::None) fail("gateway-initiated schemes send no indication");
    }
  }
};

inline MappingScheme make_scheme(std::string name, Initiator init, FlowDirection dir, Way ind, Way interest,
                                 Way data, bool push) {
  MappingScheme s{std::move(name), init, dir, ind, interest, data, push};
  s.validate();
  return s;
}

/// Every named preset: the twelve upstream overview schemes, the two downstream schemes with CAP
/// variants, and the indirect-transmission Interest broadcast.
inline const std::vector<MappingScheme>& scheme_presets() {
  using I = Initiator;
  using D = FlowDirection;
  using W = Way;
  static const std::vector<MappingScheme> presets = {
      make_scheme("interest-beacon-data-cap", I::Gateway, D::NodeToGateway, W::None, W::BeaconPayload, W::Cap, false),
      make_scheme("interest-beacon-data-cfp", I::Gateway, D::NodeToGateway, W::None, W::BeaconPayload, W::Cfp, false),
      make_scheme("interest-cap-data-cap", I::Gateway, D::NodeToGateway, W::None, W::Cap, W::Cap, false),
      make_scheme("interest-cap-data-cfp", I::Gateway, D::NodeToGateway, W::None, W::Cap, W::Cfp, false),
      make_scheme("interest-cfp-data-cap", I::Gateway, D::NodeToGateway, W::None, W::Cfp, W::Cap, false),
      make_scheme("interest-cfp-data-cfp", I::Gateway, D::NodeToGateway, W::None, W::Cfp, W::Cfp, false),
      make_scheme("indication-cap-interest-cfp-data-cap", I::Node, D::NodeToGateway, W::Cap, W::Cfp, W::Cap, false),
      make_scheme("indication-cap-interest-cfp-data-cfp", I::Node, D::NodeToGateway, W::Cap, W::Cfp, W::Cfp, false),
      make_scheme("indication-cfp-interest-cfp-data-cap", I::Node, D::NodeToGateway, W::Cfp, W::Cfp, W::Cap, false),
      make_scheme("indication-cfp-interest-cfp-data-cfp", I::Node, D::NodeToGateway, W::Cfp, W::Cfp, W::Cfp, false),
      make_scheme("push-cap", I::Node, D::NodeToGateway, W::None, W::None, W::Cap, true),
      make_scheme("push-cfp", I::Node, D::NodeToGateway, W::None, W::None, W::Cfp, true),
      make_scheme("interest-indirect-data-cap", I::Gateway, D::NodeToGateway, W::None, W::BeaconIndirectCap, W::Cap, false),
      make_scheme("interest-indirect-data-cfp", I::Gateway, D::NodeToGateway, W::None, W::BeaconIndirectCap, W::Cfp, false),
      make_scheme("downstream-unicast", I::Node, D::GatewayToNode, W::None, W::Cfp, W::Cfp, false),
      make_scheme("downstream-unicast-cap", I::Node, D::GatewayToNode, W::None, W::Cap, W::Cfp, false),
      make_scheme("downstream-broadcast", I::Node, D::GatewayToNode, W::None, W::Cfp, W::BeaconPayload, false),
      make_scheme("downstream-broadcast-cap", I::Node, D::GatewayToNode, W::None, W::Cap, W::BeaconPayload, false),
  };
  return presets;
}

inline const MappingScheme& find_scheme(const std::string& name) {
  const auto& all = scheme_presets();
  auto it = std::find_if(all.begin(), all.end(), [&](const MappingScheme& s) { return s.name == name; });
  if (it == all.end()) throw ConfigError("unknown scheme '" + name + "'");
  return *it;
}

/// The twelve schemes of the 14-node overview table, in table order.
inline std::vector<std::string> table_schemes() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < 12; ++i) out.push_back(scheme_presets()[i].name);
  return out;
}

}  // namespace loraicn
