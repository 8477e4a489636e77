#include "evframes/cli.hpp"

int main(int argc, char** argv) { return evframes::run_cli(argc, argv); }
