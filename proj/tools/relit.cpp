#include "relit/app.hpp"

int main(int argc, char** argv) { return relit::app::run(argc, argv); }
