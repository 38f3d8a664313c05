#pragma once

#include "xmego/calendar.hpp"
#include "xmego/context.hpp"
#include "xmego/error.hpp"
#include "xmego/eval.hpp"
#include "xmego/experiment.hpp"
#include "xmego/geo.hpp"
#include "xmego/learner.hpp"
#include "xmego/lexicon.hpp"
#include "xmego/logic.hpp"
#include "xmego/osm.hpp"
#include "xmego/parser.hpp"
#include "xmego/records.hpp"
#include "xmego/service.hpp"
#include "xmego/store.hpp"
#include "xmego/synth.hpp"
#include "xmego/text.hpp"
#include "xmego/world.hpp"
