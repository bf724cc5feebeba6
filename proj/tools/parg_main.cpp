#include "parg/cli.hpp"

int main(int argc, char** argv) { return parg::run_cli(argc, argv); }
