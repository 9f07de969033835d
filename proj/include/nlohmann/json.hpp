#pragma once
// Routes to the vendored single-header nlohmann/json (vendor/json.hpp) so the
// build never silently picks up an older system copy.
#include <json.hpp>
