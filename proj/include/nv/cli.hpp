#pragma once

namespace nv::cli {

int dispatch(int argc, char **argv);

} // namespace nv::cli
