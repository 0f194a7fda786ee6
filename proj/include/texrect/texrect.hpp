#pragma once

#include "texrect/attention.hpp"
#include "texrect/backend.hpp"
#include "texrect/image.hpp"
#include "texrect/injection.hpp"
#include "texrect/kv_cache.hpp"
#include "texrect/manifest.hpp"
#include "texrect/png_io.hpp"
#include "texrect/rectify.hpp"
#include "texrect/remote_backend.hpp"
#include "texrect/runner.hpp"
#include "texrect/schedule.hpp"
#include "texrect/stub_backend.hpp"
#include "texrect/sweep.hpp"
#include "texrect/target_prep.hpp"
