#include "jetpref/cli.hpp"

int main(int argc, char** argv) { return jetpref::run_cli(argc, argv); }
