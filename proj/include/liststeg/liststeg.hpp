#pragma once

#include "liststeg/alias.hpp"
#include "liststeg/bitstring.hpp"
#include "liststeg/bridge_client.hpp"
#include "liststeg/candidates.hpp"
#include "liststeg/capacity.hpp"
#include "liststeg/codec.hpp"
#include "liststeg/dist.hpp"
#include "liststeg/error.hpp"
#include "liststeg/metrics.hpp"
#include "liststeg/model.hpp"
#include "liststeg/model_config.hpp"
#include "liststeg/prg.hpp"
#include "liststeg/selftest.hpp"
#include "liststeg/stegofile.hpp"
