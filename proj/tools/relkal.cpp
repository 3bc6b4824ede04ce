#include "relkal/cli.hpp"

int main(int argc, char** argv) { return relkal::run_command(argc, argv); }
