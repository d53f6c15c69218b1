// Copyright 2026 The Oak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace oak {

/// Base of every error raised by the orchestrator libraries.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define OAK_DEFINE_ERROR(Name)                                   \
    class Name : public ::oak::Error {                           \
    public:                                                      \
        explicit Name(const std::string& what)                   \
            : ::oak::Error(std::string(#Name ": ") + what) {}    \
    }

// core-model
OAK_DEFINE_ERROR(UnderflowError);
OAK_DEFINE_ERROR(EmptyAggregateError);
OAK_DEFINE_ERROR(InvalidArgumentError);
OAK_DEFINE_ERROR(TreeInvariantError);
OAK_DEFINE_ERROR(SlaParseError);
OAK_DEFINE_ERROR(UnknownRegionError);

// coords
OAK_DEFINE_ERROR(DimensionMismatchError);
OAK_DEFINE_ERROR(InsufficientAnchorsError);
OAK_DEFINE_ERROR(DegenerateGeometryError);

// resource-manager
OAK_DEFINE_ERROR(DuplicateIdError);
OAK_DEFINE_ERROR(CapacityInvalidError);
OAK_DEFINE_ERROR(UnknownWorkerError);

// scheduler
OAK_DEFINE_ERROR(NoFeasibleClusterError);
OAK_DEFINE_ERROR(NoFeasibleWorkerError);
OAK_DEFINE_ERROR(DependencyUnplacedError);
OAK_DEFINE_ERROR(DeadlineExceededError);
OAK_DEFINE_ERROR(ExhaustedError);
OAK_DEFINE_ERROR(UnknownSchedulerError);

// lifecycle
OAK_DEFINE_ERROR(IllegalTransitionError);
OAK_DEFINE_ERROR(WorkerRejectedError);
OAK_DEFINE_ERROR(SubnetExhaustedError);

// overlay
OAK_DEFINE_ERROR(UnresolvableError);
OAK_DEFINE_ERROR(NetworkError);
OAK_DEFINE_ERROR(UnknownNameError);
OAK_DEFINE_ERROR(UnknownPolicyError);
OAK_DEFINE_ERROR(PeerUnreachableError);
OAK_DEFINE_ERROR(AddressFormatError);

// control-plane
OAK_DEFINE_ERROR(TopicClosedError);
OAK_DEFINE_ERROR(PeerDownError);
OAK_DEFINE_ERROR(MalformedMessageError);

// simharness
OAK_DEFINE_ERROR(ScenarioInvalidError);
OAK_DEFINE_ERROR(UnknownParameterError);

#undef OAK_DEFINE_ERROR

}  // namespace oak
