#pragma once

#include "immfpf/config.hpp"
#include "immfpf/error.hpp"
#include "immfpf/gain_check.hpp"
#include "immfpf/hybrid_model.hpp"
#include "immfpf/io.hpp"
#include "immfpf/mode_probability.hpp"
#include "immfpf/oracles.hpp"
#include "immfpf/particle_bank.hpp"
#include "immfpf/random.hpp"
#include "immfpf/scalar_function.hpp"
#include "immfpf/scenario.hpp"
#include "immfpf/text.hpp"
