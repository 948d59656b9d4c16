#pragma once

#include "adalign/alignment.hpp"
#include "adalign/cca.hpp"
#include "adalign/disentangle.hpp"
#include "adalign/embedding_store.hpp"
#include "adalign/error.hpp"
#include "adalign/map_io.hpp"
#include "adalign/retrieval.hpp"
#include "adalign/synthetic.hpp"
