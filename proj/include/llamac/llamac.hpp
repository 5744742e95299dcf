#pragma once

// Everything except the HTTP backend, which pulls in cpp-httplib.

#include "llamac/actor.hpp"
#include "llamac/backend.hpp"
#include "llamac/core.hpp"
#include "llamac/critic.hpp"
#include "llamac/env_grid.hpp"
#include "llamac/env_gs.hpp"
#include "llamac/memory.hpp"
#include "llamac/orchestrator.hpp"
#include "llamac/parse.hpp"
#include "llamac/prompts.hpp"
#include "llamac/report.hpp"
#include "llamac/scenario.hpp"
#include "llamac/scripted.hpp"
#include "llamac/session.hpp"
#include "llamac/transcript.hpp"
