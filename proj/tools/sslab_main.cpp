#include "sslab/cli.hpp"

int main(int argc, char** argv) { return sslab::run(argc, argv); }
