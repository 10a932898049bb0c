#include "portopt/cli.hpp"

int main(int argc, char** argv) { return portopt::cli::dispatch(argc, argv); }
