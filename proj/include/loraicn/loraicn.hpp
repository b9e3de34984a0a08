#pragma once

#include "loraicn/sim_core.hpp"
#include "loraicn/phy_lora.hpp"
#include "loraicn/queue_model.hpp"
#include "loraicn/icn.hpp"
#include "loraicn/mac_dsme.hpp"
#include "loraicn/mapping.hpp"
#include "loraicn/network.hpp"
#include "loraicn/experiments.hpp"
