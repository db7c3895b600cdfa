/*
   Copyright 2026 The rapidset Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace rapidset {

// Argument outside the documented domain of an operation.
class invalid_argument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A path is too coarse for the requested stage.
class insufficient_resolution_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A formula was evaluated outside the region where it is defined.
class domain_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// An inequality required before a bound may be applied does not hold.
class precondition_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class empty_measure_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class degenerate_spectrum_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rapidset
