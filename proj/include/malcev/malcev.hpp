#pragma once

// Umbrella header: terms, relations, graphs, finite algebras, condition
// generation, and decision procedures.

#include "binrel.hpp"
#include "decide.hpp"
#include "finalg.hpp"
#include "malcevgen.hpp"
#include "relterm.hpp"
#include "termgraph.hpp"
