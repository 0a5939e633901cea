#pragma once

#include "kgcmlp/analysis.hpp"
#include "kgcmlp/channel.hpp"
#include "kgcmlp/error.hpp"
#include "kgcmlp/exchange.hpp"
#include "kgcmlp/experiments.hpp"
#include "kgcmlp/frame.hpp"
#include "kgcmlp/key_codec.hpp"
#include "kgcmlp/protocol.hpp"
#include "kgcmlp/rng.hpp"
#include "kgcmlp/tpm.hpp"
#include "kgcmlp/udp.hpp"
#include "kgcmlp/vectors.hpp"
