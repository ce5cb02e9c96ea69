#include "fkprop/cli.hpp"

int main(int argc, char** argv) { return fkprop::run_cli(argc, argv); }
