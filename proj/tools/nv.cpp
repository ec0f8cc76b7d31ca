#include "nv/cli.hpp"

int main(int argc, char **argv) { return nv::cli::dispatch(argc, argv); }
