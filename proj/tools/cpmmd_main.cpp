#include "cpmmd/cli.hpp"

int main(int argc, char** argv) { return cpmmd::run_cli(argc, argv); }
